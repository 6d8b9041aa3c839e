"""Online deep Q-learning loop shared by all four optimizers.

Each environment step picks an action epsilon-greedily from the live
Q-network, stores the transition in a FIFO replay memory and in the run's
full transition record. Every ``learn_freq`` steps, once the memory holds a
full batch, one outer iteration runs on a fresh batch of ``batch_size``
transitions. Every batch and every inner-loop draw is kept, so a run can be
replayed exactly (see :mod:`srgdqn.diagnostics`).
"""

from __future__ import annotations

import dataclasses
import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .config import TaskConfig
from .diagnostics import MetricsRow, grad_std_sum
from .env import make_task
from .optim import OPTIMIZERS, AdamState, EpochInputs, outer_iteration
from .qnet import Layout, ParamVector, forward, init_params
from .replay import ReplayBuffer, Transition, TransitionBatch

log = logging.getLogger(__name__)

LOG_COLUMNS = (
    "env_step", "epoch", "episode", "avg_reward", "window_avg_reward_100",
    "episode_length", "epsilon", "delta_norm_mean", "ifo_cumulative",
)


def epsilon_schedule(step: int, total_steps: int, start: float = 0.1, end: float = 0.001) -> float:
    """Linear ramp from ``start`` at step 0 to ``end`` at ``total_steps``, flat afterwards."""
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    frac = min(max(step, 0) / total_steps, 1.0)
    return start + (end - start) * frac


def select_action(qvalues: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; greedy ties go to the lowest index."""
    qvalues = np.asarray(qvalues)
    if qvalues.size == 0:
        raise ValueError("empty Q-value vector")
    if rng.random() < epsilon:
        return int(rng.integers(qvalues.size))
    return int(np.argmax(qvalues))


@dataclass
class EpochRecord:
    epoch: int
    env_step: int
    batch_ids: np.ndarray
    draws: np.ndarray


@dataclass
class RunResult:
    config: TaskConfig
    algo: str
    log: list[dict] = field(default_factory=list)
    diagnostics: list[MetricsRow] = field(default_factory=list)
    theta_init: ParamVector | None = None
    theta_final: ParamVector | None = None
    transitions: list[Transition] = field(default_factory=list)
    epochs: list[EpochRecord] = field(default_factory=list)

    def transition_batch(self) -> TransitionBatch:
        return TransitionBatch.from_transitions(self.transitions)

    def with_config(self, config: TaskConfig) -> RunResult:
        return dataclasses.replace(self, config=config)


def _seed_streams(seed: int):
    init_ss, env_ss, act_ss, sample_ss = np.random.SeedSequence(seed).spawn(4)
    init_seed = int(init_ss.generate_state(1)[0])
    return (
        init_seed,
        np.random.default_rng(env_ss),
        np.random.default_rng(act_ss),
        np.random.default_rng(sample_ss),
    )


def run_training(config: TaskConfig, algo: str, env: str | None = None) -> RunResult:
    """Train one agent; returns the metrics log, diagnostics, final parameters and the full record.

    ``env`` overrides ``config.task`` when given.
    """
    if algo not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer {algo!r}; expected one of {OPTIMIZERS}")
    if env is not None and env != config.task:
        config = config.replace(task=env)
    task = make_task(config.task, config.max_episode_steps or None)
    layout = Layout.for_task(task.obs_dim, task.n_actions, config.hidden_nodes, config.hidden_layers)
    init_seed, env_rng, act_rng, sample_rng = _seed_streams(config.seed)
    theta = init_params(init_seed, layout)
    result = RunResult(config=config, algo=algo, theta_init=theta, theta_final=theta)
    if config.budget <= 0:
        return result

    adam = AdamState.zeros(
        layout.n_params, alpha=config.alpha, beta1=config.beta1,
        beta2=config.beta2, eps_adam=config.eps_adam,
    )
    buffer = ReplayBuffer(config.replay_capacity)
    by_episodes = config.budget_unit == "episodes"
    track_anchor = config.track_anchor and algo != "sgd"

    step = episode = epoch = ifo = 0
    reward_sum = 0.0
    recent_rewards: deque[float] = deque(maxlen=100)
    returns: list[float] = []
    episode_return, episode_len, last_len = 0.0, 0, 0
    last_batch: TransitionBatch | None = None
    pending_dists: list[float] = []
    state = task.reset(int(env_rng.integers(2**31)))

    while (episode if by_episodes else step) < config.budget:
        epsilon = epsilon_schedule(
            episode if by_episodes else step, config.budget, config.eps_start, config.eps_end
        )
        action = select_action(forward(theta, state.observation), epsilon, act_rng)
        nxt, _, _ = task.step(state, action)
        reward = task.shaped_reward(state, nxt, action)
        t = Transition(state.observation, action, reward, nxt.observation, nxt.terminal and not nxt.truncated)
        buffer.push(t, tag=len(result.transitions))
        result.transitions.append(t)
        step += 1
        reward_sum += reward
        episode_return += reward
        episode_len += 1
        if not by_episodes:
            recent_rewards.append(reward)
        if nxt.terminal:
            returns.append(episode_return)
            if by_episodes:
                recent_rewards.append(episode_return)
            episode += 1
            last_len = episode_len
            episode_return, episode_len = 0.0, 0
            state = task.reset(int(env_rng.integers(2**31)))
        else:
            state = nxt

        if step % config.learn_freq == 0 and len(buffer) >= config.batch_size:
            items, tags = buffer.sample_tagged(config.batch_size, sample_rng)
            # record order, so a batch covering the whole record sums exactly like the record
            order = sorted(range(len(tags)), key=tags.__getitem__)
            items, tags = [items[i] for i in order], [tags[i] for i in order]
            batch = TransitionBatch.from_transitions(items)
            inputs = EpochInputs(
                batch, theta, config.gamma, config.eta, config.inner_steps,
                rng=sample_rng, track_anchor=track_anchor,
            )
            theta, report, adam = outer_iteration(
                algo, inputs, adam,
                svrg_adam=config.svrg_adam,
                adam_denominator=config.adam_denominator,
                adam_grad_source=config.adam_grad_source,
            )
            epoch += 1
            ifo += report.ifo_queries
            last_batch = batch
            pending_dists.extend(report.anchor_distances)
            result.epochs.append(EpochRecord(epoch, step, np.asarray(tags, dtype=np.intp), report.draws))
            if by_episodes:
                avg = float(np.mean(returns)) if returns else math.nan
            else:
                avg = reward_sum / step
            result.log.append({
                "env_step": step,
                "epoch": epoch,
                "episode": episode,
                "avg_reward": avg,
                "window_avg_reward_100": float(np.mean(recent_rewards)) if recent_rewards else math.nan,
                "episode_length": last_len,
                "epsilon": epsilon,
                "delta_norm_mean": float(np.mean(report.delta_norms)) if report.delta_norms else math.nan,
                "ifo_cumulative": ifo,
            })

        if step % config.diag_every == 0 and last_batch is not None and len(last_batch) >= 2:
            result.diagnostics.append(MetricsRow(
                checkpoint_step=step,
                algo=algo,
                seed=config.seed,
                grad_std_sum=grad_std_sum(last_batch, theta, config.gamma),
                anchor_distance=float(np.mean(pending_dists)) if pending_dists else math.nan,
            ))
            pending_dists = []

    result.theta_final = theta
    log.debug("%s/%s seed %d: %d steps, %d epochs", config.task, algo, config.seed, step, epoch)
    return result
