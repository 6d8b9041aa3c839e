"""Gradient-spread and anchor-quality measurements, and the exact-anchor re-run.

The re-run replays a recorded SVRG training run offline. It uses the same
batches and inner draws, once with the usual batch anchor and once with the
anchor taken over every transition the run ever recorded. That second
anchor is an oracle: an online learner cannot see future transitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import TaskConfig
from .env import make_task
from .optim import EpochInputs, svrg_epoch, per_sample_td_gradients
from .qnet import LayoutError, ParamVector, forward
from .replay import TransitionBatch, as_batch


class RecordError(ValueError):
    """Raised when a recorded run cannot be replayed."""


@dataclass
class MetricsRow:
    checkpoint_step: int
    algo: str
    seed: int
    grad_std_sum: float
    anchor_distance: float


DIAGNOSTICS_COLUMNS = ("checkpoint_step", "algo", "seed", "grad_std_sum", "anchor_distance_mean")


def grad_std_sum(batch, params: ParamVector, gamma: float) -> float:
    """Sum over first-layer weights of the per-weight population std of the loss gradient across the batch."""
    batch = as_batch(batch)
    if len(batch) < 2:
        raise ValueError("grad_std_sum needs at least two transitions")
    cols = params.layout.first_layer_weights
    # one transition at a time: a batched matmul may round identical rows differently
    grads = np.stack([per_sample_td_gradients(batch.take([i]), params, gamma)[0, cols] for i in range(len(batch))])
    # std is shift invariant; centring on one sample makes identical rows give exactly 0
    return float(np.std(grads - grads[0], axis=0).sum())


def anchor_distance(anchor: np.ndarray, exact: np.ndarray) -> float:
    anchor = np.asarray(anchor, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    if anchor.shape != exact.shape:
        raise LayoutError(f"layout mismatch: {anchor.shape} vs {exact.shape}")
    return float(np.linalg.norm(anchor - exact))


def evaluate_policy(params: ParamVector, config: TaskConfig, seeds) -> float:
    """Greedy rollouts, one episode per seed.

    Returns the mean per-step shaped reward, or the mean episode return when
    the task budget is counted in episodes.
    """
    task = make_task(config.task, config.max_episode_steps or None)
    total, steps, returns = 0.0, 0, []
    for seed in seeds:
        state = task.reset(int(seed))
        episode_return = 0.0
        while not state.terminal:
            action = int(np.argmax(forward(params, state.observation)))
            nxt, _, _ = task.step(state, action)
            r = task.shaped_reward(state, nxt, action)
            episode_return += r
            total += r
            steps += 1
            state = nxt
        returns.append(episode_return)
    if config.budget_unit == "episodes":
        return float(np.mean(returns))
    return total / steps


def eval_seeds(config: TaskConfig) -> list[int]:
    base = 1_000_003 * (config.seed + 1)
    return [base + k for k in range(config.eval_episodes)]


@dataclass
class ReplayLog:
    """One arm of a re-run: a row per evaluation checkpoint plus the final parameters."""

    arm: str
    rows: list[dict] = field(default_factory=list)
    theta_final: ParamVector | None = None
    thetas: list[ParamVector] = field(default_factory=list)
    # one entry per epoch, comparable with the original run log
    delta_norm_means: list[float] = field(default_factory=list)

    @property
    def mean_eval_reward(self) -> float:
        return float(np.mean([r["eval_reward"] for r in self.rows])) if self.rows else math.nan


REPLAY_COLUMNS = ("epoch", "env_step", "eval_reward", "delta_norm_mean", "ifo_cumulative")


def replay_svrg(run, anchor: str = "batch", keep_thetas: bool = False) -> ReplayLog:
    """Re-execute a recorded SVRG run without the Adam process.

    ``anchor="batch"`` reproduces the original anchors; ``anchor="exact"``
    computes every anchor over all recorded transitions.
    """
    config = run.config
    if run.algo != "svrg":
        raise RecordError(f"exact-anchor re-run needs an svrg run, got {run.algo!r}")
    if not run.transitions or not run.epochs:
        raise RecordError("recorded run has no transitions or no epochs")
    record = run.transition_batch()
    n_record = len(record)
    for ep in run.epochs:
        if len(ep.batch_ids) == 0 or max(ep.batch_ids) >= n_record or min(ep.batch_ids) < 0:
            raise RecordError(f"epoch {ep.epoch}: batch refers outside the transition record")
        if len(ep.draws) != config.inner_steps:
            raise RecordError(f"epoch {ep.epoch}: expected {config.inner_steps} inner draws")
        if ep.env_step > n_record:
            raise RecordError(f"epoch {ep.epoch}: record truncated before step {ep.env_step}")
    if anchor not in ("batch", "exact"):
        raise ValueError("anchor must be 'batch' or 'exact'")

    seeds = eval_seeds(config)
    log = ReplayLog(arm=anchor)
    theta = run.theta_init
    ifo = 0
    last = len(run.epochs) - 1
    for k, ep in enumerate(run.epochs):
        batch = record.take(ep.batch_ids)
        inputs = EpochInputs(batch, theta, config.gamma, config.eta, config.inner_steps, draws=ep.draws)
        report = svrg_epoch(inputs, anchor_batch=record if anchor == "exact" else None)
        theta = report.theta_out
        ifo += report.ifo_queries
        dnm = float(np.mean(report.delta_norms)) if report.delta_norms else math.nan
        log.delta_norm_means.append(dnm)
        if keep_thetas:
            log.thetas.append(theta)
        crossed = ep.env_step // config.diag_every > (run.epochs[k - 1].env_step // config.diag_every if k else 0)
        if crossed or k == last:
            log.rows.append({
                "epoch": ep.epoch,
                "env_step": ep.env_step,
                "eval_reward": evaluate_policy(theta, config, seeds),
                "delta_norm_mean": dnm,
                "ifo_cumulative": ifo,
            })
    log.theta_final = theta
    return log


def exact_anchor_rerun(run, config: TaskConfig | None = None) -> tuple[ReplayLog, ReplayLog]:
    """Paired offline re-runs of a recorded SVRG run: (standard anchors, exact anchors)."""
    if config is not None:
        run = run.with_config(config)
    return replay_svrg(run, "batch"), replay_svrg(run, "exact")
