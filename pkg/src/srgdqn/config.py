"""Task configuration with per-task defaults and a strict ``key = value`` loader."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .env import TASKS
from .optim import ADAM_DENOMINATORS, ADAM_GRAD_SOURCES, OPTIMIZERS


class ConfigError(ValueError):
    pass


# hidden nodes, alpha, eta, beta1, beta2, batch N, inner M, gamma, budget
TABLE1 = {
    "cartpole": dict(hidden_nodes=8, alpha=1e-3, eta=1e-2, beta1=0.9, beta2=0.999,
                     batch_size=64, inner_steps=16, gamma=0.99, budget=800, budget_unit="episodes"),
    "mountaincar": dict(hidden_nodes=20, alpha=1e-3, eta=1e-2, beta1=0.9, beta2=0.999,
                        batch_size=64, inner_steps=16, gamma=0.9, budget=100_000, budget_unit="steps"),
    "pendulum": dict(hidden_nodes=20, alpha=1e-3, eta=1e-3, beta1=0.9, beta2=0.999,
                     batch_size=32, inner_steps=16, gamma=0.9, budget=20_000, budget_unit="steps"),
}


@dataclass(frozen=True)
class TaskConfig:
    task: str = "mountaincar"
    hidden_nodes: int = 20
    hidden_layers: int = 1
    alpha: float = 1e-3
    eta: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    batch_size: int = 64
    inner_steps: int = 16
    gamma: float = 0.9
    budget: int = 100_000
    budget_unit: str = "steps"
    learn_freq: int = 16
    eps_start: float = 0.1
    eps_end: float = 0.001
    replay_capacity: int = 10_000
    seed: int = 0
    adam_denominator: str = "paper_norm"
    adam_grad_source: str = "last_grad"
    svrg_adam: bool = True
    diag_every: int = 1000
    track_anchor: bool = True
    max_episode_steps: int = 0  # 0 keeps the task's own cap
    eval_episodes: int = 3

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.budget_unit not in ("steps", "episodes"):
            raise ConfigError("budget_unit must be 'steps' or 'episodes'")
        if self.adam_denominator not in ADAM_DENOMINATORS:
            raise ConfigError(f"adam_denominator must be one of {ADAM_DENOMINATORS}")
        if self.adam_grad_source not in ADAM_GRAD_SOURCES:
            raise ConfigError(f"adam_grad_source must be one of {ADAM_GRAD_SOURCES}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        for name in ("batch_size", "learn_freq", "replay_capacity", "hidden_nodes",
                     "hidden_layers", "diag_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.inner_steps < 0 or self.budget < 0:
            raise ConfigError("inner_steps and budget must be non-negative")

    @classmethod
    def for_task(cls, task: str, **overrides) -> TaskConfig:
        if task not in TABLE1:
            raise ConfigError(f"unknown task {task!r}; expected one of {TASKS}")
        return cls(task=task, **{**TABLE1[task], **overrides})

    def replace(self, **changes) -> TaskConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(TaskConfig)}
_EXPERIMENT_KEYS = ("algos", "seeds", "out")


def _coerce(key: str, raw: str, kind: str):
    try:
        if kind == "int":
            return int(raw.replace("_", ""))
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind}") from None


def parse_seeds(text: str) -> list[int]:
    """``"0-4"`` -> [0..4]; ``"1,5,7"`` -> [1, 5, 7]; forms may be mixed. Seeds are non-negative."""
    seeds: list[int] = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = part.split("-", 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise ConfigError(f"bad seed list {text!r}") from None
    return seeds


@dataclass
class ExperimentSpec:
    task: str
    algos: list[str] = field(default_factory=lambda: ["sgd", "svrg", "sarah", "sarah_adam"])
    seeds: list[int] = field(default_factory=lambda: [0])
    overrides: dict = field(default_factory=dict)
    out: Path = Path("results")

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if not self.algos or not self.seeds:
            raise ConfigError("an experiment needs at least one algorithm and one seed")
        for algo in self.algos:
            if algo not in OPTIMIZERS:
                raise ConfigError(f"unknown optimizer {algo!r}; expected one of {OPTIMIZERS}")
        unknown = set(self.overrides) - set(_FIELD_TYPES) - {"task"}
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        self.out = Path(self.out)

    def task_config(self, seed: int) -> TaskConfig:
        overrides = {k: v for k, v in self.overrides.items() if k != "task"}
        return TaskConfig.for_task(self.task, **overrides).replace(seed=seed)


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines (``#`` starts a comment) into typed values."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in _EXPERIMENT_KEYS:
            if key == "algos":
                values[key] = [a.strip() for a in raw.split(",") if a.strip()]
            elif key == "seeds":
                values[key] = parse_seeds(raw)
            else:
                values[key] = Path(raw)
        elif key in _FIELD_TYPES:
            values[key] = _coerce(key, raw, _FIELD_TYPES[key])
        else:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
    return values


def load_config(path: str | Path | None, task: str | None = None) -> ExperimentSpec:
    """Load an experiment; keys missing from the file fall back to the task's defaults.

    ``task`` (e.g. from the command line) takes precedence over a ``task``
    line in the file.
    """
    values = parse_config_text(Path(path).read_text()) if path is not None else {}
    task = task or values.pop("task", None)
    values.pop("task", None)
    if task is None:
        raise ConfigError("no task given (set 'task = ...' or pass --task)")
    kwargs = {k: values.pop(k) for k in _EXPERIMENT_KEYS if k in values}
    spec = ExperimentSpec(task=task, overrides=values, **kwargs)
    spec.task_config(spec.seeds[0])  # surface invalid values now
    return spec
