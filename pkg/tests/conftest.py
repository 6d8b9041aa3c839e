import numpy as np
import pytest

from srgdqn.qnet import Layout, ParamVector
from srgdqn.replay import Transition


def central_difference(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Independent gradient oracle: (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate."""
    grad = np.empty_like(x)
    for i in range(x.size):
        up, down = x.copy(), x.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (f(up) - f(down)) / (2.0 * h)
    return grad


def max_relative_error(g: np.ndarray, ref: np.ndarray) -> float:
    """Largest coordinate error relative to the larger of the two vectors' inf-norms."""
    scale = max(np.max(np.abs(g)), np.max(np.abs(ref)), 1e-12)
    return float(np.max(np.abs(g - ref)) / scale)


def random_net(rng, obs_dim, n_actions, hidden, hidden_layers=1, scale=1.0):
    layout = Layout.for_task(obs_dim, n_actions, hidden, hidden_layers)
    return ParamVector(scale * rng.standard_normal(layout.n_params), layout)


def random_transition(rng, obs_dim, n_actions, terminal=None):
    return Transition(
        rng.standard_normal(obs_dim),
        int(rng.integers(n_actions)),
        float(rng.standard_normal()),
        rng.standard_normal(obs_dim),
        bool(rng.random() < 0.2) if terminal is None else terminal,
    )


def one_one_one(w1=1.0, b1=0.0, w2=2.0, b2=0.5) -> ParamVector:
    return ParamVector(np.array([w1, b1, w2, b2]), Layout((1, 1, 1)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_lines():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
