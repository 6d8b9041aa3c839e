"""Semi-gradient TD losses and the optimizer epochs used by the trainer.

All gradients here are gradients of the squared TD error
``(y - Q(S, A; theta))**2`` with the bootstrap target ``y`` held constant,
so every update is ``theta <- theta - eta * direction``.

Four optimizers share one outer-iteration interface (see
:func:`outer_iteration`):

``sgd``
    ``M`` single-transition steps.
``svrg``
    a batch-gradient anchor at the epoch start plus ``M`` corrected steps,
    followed by the Adam process unless disabled.
``sarah``
    recursive estimates ``D_m = g_m - g_{m-1} + D_{m-1}`` seeded with a
    full-batch step.
``sarah_adam``
    ``sarah`` followed by the Adam process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .qnet import LayoutError, ParamVector, batch_q_grads, forward, weighted_q_grad_sum
from .replay import Transition, TransitionBatch, as_batch

OPTIMIZERS = ("sgd", "svrg", "sarah", "sarah_adam")
ADAM_DENOMINATORS = ("paper_norm", "elementwise")
ADAM_GRAD_SOURCES = ("last_grad", "recursive")


def bellman_targets(batch: TransitionBatch, params: ParamVector, gamma: float) -> np.ndarray:
    """``y = R + gamma * max_a Q(S', a)``, or ``R`` for terminal transitions."""
    next_q = forward(params, batch.next_states).max(axis=1)
    return batch.rewards + gamma * np.where(batch.terminals, 0.0, next_q)


def bellman_target(t: Transition, params: ParamVector, gamma: float) -> float:
    return float(bellman_targets(as_batch(t), params, gamma)[0])


def per_sample_td_gradients(batch: TransitionBatch, params: ParamVector, gamma: float) -> np.ndarray:
    """Row ``i`` is the loss gradient for transition ``i``; shape ``(n, n_params)``."""
    y = bellman_targets(batch, params, gamma)
    q, grads = batch_q_grads(params, batch.states, batch.actions)
    return (-2.0 * (y - q))[:, None] * grads


def td_gradient(t: Transition, params: ParamVector, gamma: float) -> np.ndarray:
    return per_sample_td_gradients(as_batch(t), params, gamma)[0]


def full_batch_gradient(batch, params: ParamVector, gamma: float) -> np.ndarray:
    """Mean per-transition loss gradient over the batch (``N`` oracle queries)."""
    batch = as_batch(batch)
    n = len(batch)
    y = bellman_targets(batch, params, gamma)
    # the weights depend on Q itself, so take it from a plain forward pass first
    q = forward(params, batch.states)[np.arange(n), batch.actions]
    _, g = weighted_q_grad_sum(params, batch.states, batch.actions, -2.0 * (y - q) / n)
    return g


@dataclass
class EpochInputs:
    batch: TransitionBatch
    theta0: ParamVector
    gamma: float
    eta: float
    M: int
    rng: np.random.Generator | None = None
    # pre-drawn inner-loop indices into ``batch``; drawn from ``rng`` when None
    draws: np.ndarray | None = None
    track_anchor: bool = False
    keep_snapshots: bool = False

    def __post_init__(self):
        self.batch = as_batch(self.batch)
        if self.M < 0:
            raise ValueError("M must be non-negative")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.eta < 0.0:
            raise ValueError("eta must be non-negative")

    def inner_draws(self) -> np.ndarray:
        if self.draws is not None:
            draws = np.asarray(self.draws, dtype=np.intp)
            if draws.shape != (self.M,) or (self.M and (draws.min() < 0 or draws.max() >= len(self.batch))):
                raise ValueError("draws must hold M indices into the batch")
            return draws
        if self.rng is None:
            raise ValueError("either rng or draws is required")
        return self.rng.integers(0, len(self.batch), size=self.M)


@dataclass
class EpochReport:
    theta_out: ParamVector
    delta_norms: list[float]
    ifo_queries: int
    draws: np.ndarray
    # parameters at which the last stochastic gradient was evaluated, and that gradient
    theta_last: ParamVector
    g_last: np.ndarray
    delta_last: np.ndarray
    anchor_distances: list[float] = field(default_factory=list)
    # (m, direction_m, theta_m) per step when requested
    anchor_snapshots: list[tuple[int, np.ndarray, ParamVector]] | None = None


def _single(batch: TransitionBatch, params: ParamVector, gamma: float, i: int) -> np.ndarray:
    return per_sample_td_gradients(batch.take(i), params, gamma)[0]


def sgd_epoch(inputs: EpochInputs) -> EpochReport:
    """``M`` plain steps on uniformly drawn transitions; one oracle query each."""
    batch, gamma, eta = inputs.batch, inputs.gamma, inputs.eta
    draws = inputs.inner_draws()
    theta = inputs.theta0
    norms: list[float] = []
    snaps = [] if inputs.keep_snapshots else None
    g = np.zeros_like(theta.values)
    theta_last = theta
    for m, i in enumerate(draws):
        g = _single(batch, theta, gamma, i)
        norms.append(float(np.linalg.norm(g)))
        if snaps is not None:
            snaps.append((m, g, theta))
        theta_last = theta
        theta = theta.with_values(theta.values - eta * g)
    return EpochReport(theta, norms, len(draws), draws, theta_last, g, g, anchor_snapshots=snaps)


def svrg_epoch(inputs: EpochInputs, anchor_batch: TransitionBatch | None = None) -> EpochReport:
    """SVR-DQN inner loop.

    The anchor is the mean gradient at ``theta0`` over ``anchor_batch``
    (defaults to the epoch batch). Step ``m`` uses
    ``g(theta_m) - g(theta0) + anchor`` on a drawn transition, starting from
    ``theta_0 = theta0``.
    """
    batch, gamma, eta = inputs.batch, inputs.gamma, inputs.eta
    anchor_batch = batch if anchor_batch is None else as_batch(anchor_batch)
    draws = inputs.inner_draws()
    theta0 = inputs.theta0
    anchor = full_batch_gradient(anchor_batch, theta0, gamma)
    ifo = len(anchor_batch)

    theta = theta0
    norms: list[float] = []
    dists: list[float] = []
    snaps = [] if inputs.keep_snapshots else None
    theta_last, g_last, delta = theta0, anchor, anchor
    for m, i in enumerate(draws):
        g_m = _single(batch, theta, gamma, i)
        g_0 = _single(batch, theta0, gamma, i)
        ifo += 2
        delta = g_m - g_0 + anchor
        if inputs.track_anchor:
            exact = full_batch_gradient(batch, theta, gamma)
            dists.append(float(np.linalg.norm(anchor - exact)))
        if snaps is not None:
            snaps.append((m, delta, theta))
        norms.append(float(np.linalg.norm(delta)))
        theta_last, g_last = theta, g_m
        theta = theta.with_values(theta.values - eta * delta)
    return EpochReport(theta, norms, ifo, draws, theta_last, g_last, delta, dists, snaps)


def sarah_epoch(inputs: EpochInputs) -> EpochReport:
    """Recursive-gradient inner loop.

    ``D_0`` is the batch gradient at ``theta_0`` and ``theta_1 = theta_0 - eta D_0``.
    For ``m = 1..M`` a drawn transition gives ``D_m = g(theta_m) - g(theta_{m-1}) + D_{m-1}``
    and ``theta_{m+1} = theta_m - eta D_m``. Returns ``theta_{M+1}``; the last
    stochastic gradient ``g(theta_M)`` is kept for the Adam process.
    """
    batch, gamma, eta = inputs.batch, inputs.gamma, inputs.eta
    draws = inputs.inner_draws()
    theta_prev = inputs.theta0
    delta = full_batch_gradient(batch, theta_prev, gamma)
    ifo = len(batch)
    snaps = [(0, delta, theta_prev)] if inputs.keep_snapshots else None
    theta = theta_prev.with_values(theta_prev.values - eta * delta)

    norms: list[float] = []
    dists: list[float] = []
    theta_last, g_last = theta_prev, delta
    for m, i in enumerate(draws, start=1):
        if inputs.track_anchor:
            exact = full_batch_gradient(batch, theta, gamma)
            dists.append(float(np.linalg.norm(delta - exact)))
        g_m = _single(batch, theta, gamma, i)
        g_prev = _single(batch, theta_prev, gamma, i)
        ifo += 2
        delta = g_m - g_prev + delta
        if snaps is not None:
            snaps.append((m, delta, theta))
        norms.append(float(np.linalg.norm(delta)))
        theta_last, g_last = theta, g_m
        theta_prev, theta = theta, theta.with_values(theta.values - eta * delta)
    return EpochReport(theta, norms, ifo, draws, theta_last, g_last, delta, dists, snaps)


@dataclass(frozen=True, eq=False)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    s: int = 0
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8

    @classmethod
    def zeros(cls, n_params: int, **hyper) -> AdamState:
        return cls(np.zeros(n_params), np.zeros(n_params), 0, **hyper)


def adam_process(
    theta_M: ParamVector,
    g_last: np.ndarray,
    state: AdamState,
    denominator: str = "paper_norm",
) -> tuple[ParamVector, AdamState]:
    """One end-of-epoch Adam update from ``theta_M``.

    ``denominator="paper_norm"`` divides by ``sqrt(||v_hat||_2) + eps`` (a scalar
    over the whole vector); ``"elementwise"`` is standard Adam's
    ``sqrt(v_hat) + eps``.
    """
    g = np.asarray(g_last, dtype=np.float64)
    if g.shape != theta_M.values.shape or state.m.shape != g.shape or state.v.shape != g.shape:
        raise LayoutError("Adam state, gradient and parameters must share one layout")
    if state.s < 0:
        raise ValueError("Adam counter must be non-negative")
    s = state.s + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * (g * g)
    m_hat = m / (1.0 - state.beta1**s)
    v_hat = v / (1.0 - state.beta2**s)
    if denominator == "paper_norm":
        denom = math.sqrt(float(np.linalg.norm(v_hat))) + state.eps_adam
    elif denominator == "elementwise":
        denom = np.sqrt(v_hat) + state.eps_adam
    else:
        raise ValueError(f"unknown Adam denominator {denominator!r}")
    theta = theta_M.with_values(theta_M.values - state.alpha * m_hat / denom)
    return theta, replace(state, m=m, v=v, s=s)


def eta_max_bound(M: int, mu: float) -> float:
    """Largest step size ``2 / (sqrt(mu) (sqrt(4M + 1) + 1))`` allowed by the IFO bound."""
    if M < 1 or mu <= 0:
        raise ValueError("eta_max_bound needs M >= 1 and mu > 0")
    return 2.0 / (math.sqrt(mu) * (math.sqrt(4 * M + 1) + 1.0))


def outer_iteration(
    algo: str,
    inputs: EpochInputs,
    adam: AdamState | None = None,
    *,
    svrg_adam: bool = True,
    adam_denominator: str = "paper_norm",
    adam_grad_source: str = "last_grad",
    anchor_batch: TransitionBatch | None = None,
) -> tuple[ParamVector, EpochReport, AdamState | None]:
    """Run one epoch of ``algo`` and, where it applies, the Adam process.

    The Adam step restarts from the parameters at which the last stochastic
    gradient was taken, so it replaces the inner loop's final update.
    """
    if algo == "sgd":
        report = sgd_epoch(inputs)
    elif algo == "svrg":
        report = svrg_epoch(inputs, anchor_batch=anchor_batch)
    elif algo in ("sarah", "sarah_adam"):
        report = sarah_epoch(inputs)
    else:
        raise ValueError(f"unknown optimizer {algo!r}; expected one of {OPTIMIZERS}")

    use_adam = algo == "sarah_adam" or (algo == "svrg" and svrg_adam)
    if not use_adam:
        return report.theta_out, report, adam
    if adam is None:
        raise ValueError(f"{algo} needs an AdamState")
    if adam_grad_source == "last_grad":
        g = report.g_last
    elif adam_grad_source == "recursive":
        g = report.delta_last
    else:
        raise ValueError(f"unknown Adam gradient source {adam_grad_source!r}")
    theta, adam = adam_process(report.theta_last, g, adam, adam_denominator)
    return theta, report, adam
