"""Classic-control tasks with shaped rewards and discrete actions.

Each task is a stateless object: ``reset`` builds an :class:`EnvState` from a
seed and ``step`` maps a state and an action index to the next state. States
are never mutated, so a trajectory is fully determined by the reset seed and
the action sequence.

Dynamics follow the standard gym equations (explicit Euler). Time-limit
truncation is reported as ``terminal`` with ``truncated=True`` so callers can
keep bootstrapping through the cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TASKS = ("cartpole", "mountaincar", "pendulum")


class TerminalStateError(RuntimeError):
    """Raised when ``step`` is called on a terminal state."""


@dataclass(frozen=True)
class EnvState:
    observation: np.ndarray
    step_count: int = 0
    terminal: bool = False
    truncated: bool = False
    # raw physical state; differs from the observation only for pendulum
    physical: tuple[float, ...] = ()


@dataclass(frozen=True)
class ActionSpace:
    n_actions: int
    torque_values: tuple[float, ...] | None = None


def _clip(x: float, lo: float, hi: float) -> float:
    return min(max(x, lo), hi)


def angle_normalize(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


class Task:
    name: str
    obs_dim: int
    action_space: ActionSpace
    max_steps: int

    @property
    def n_actions(self) -> int:
        return self.action_space.n_actions

    def reset(self, seed: int) -> EnvState:
        raise NotImplementedError

    def _advance(self, physical: tuple[float, ...], action: int):
        """Return (next physical state, raw reward, terminated)."""
        raise NotImplementedError

    def _observe(self, physical: tuple[float, ...]) -> np.ndarray:
        return np.array(physical, dtype=np.float64)

    def step(self, state: EnvState, action: int) -> tuple[EnvState, float, bool]:
        if state.terminal:
            raise TerminalStateError(f"{self.name}: step called on a terminal state")
        action = int(action)
        if not 0 <= action < self.n_actions:
            raise ValueError(f"{self.name}: action {action} outside [0, {self.n_actions})")
        physical, raw_reward, terminated = self._advance(state.physical, action)
        count = state.step_count + 1
        truncated = not terminated and count >= self.max_steps
        nxt = EnvState(
            observation=self._observe(physical),
            step_count=count,
            terminal=terminated or truncated,
            truncated=truncated,
            physical=physical,
        )
        return nxt, raw_reward, nxt.terminal

    def shaped_reward(self, state: EnvState, next_state: EnvState, action: int) -> float:
        raise NotImplementedError


class MountainCar(Task):
    name = "mountaincar"
    obs_dim = 2
    action_space = ActionSpace(3)

    min_position = -1.2
    max_position = 0.6
    max_speed = 0.07
    goal_position = 0.5
    goal_velocity = 0.0
    force = 0.001
    gravity = 0.0025

    def __init__(self, max_steps: int = 200):
        self.max_steps = max_steps

    def reset(self, seed: int) -> EnvState:
        rng = np.random.default_rng(seed)
        physical = (float(rng.uniform(-0.6, -0.4)), 0.0)
        return EnvState(self._observe(physical), physical=physical)

    def _advance(self, physical, action):
        position, velocity = physical
        velocity += (action - 1) * self.force - self.gravity * math.cos(3.0 * position)
        velocity = _clip(velocity, -self.max_speed, self.max_speed)
        position = _clip(position + velocity, self.min_position, self.max_position)
        if position == self.min_position and velocity < 0.0:
            velocity = 0.0
        terminated = position >= self.goal_position and velocity >= self.goal_velocity
        return (position, velocity), -1.0, terminated

    def shaped_reward(self, state, next_state, action):
        # monotone in altitude on [-1.2, pi/6]
        return math.sin(3.0 * next_state.physical[0])


class CartPole(Task):
    name = "cartpole"
    obs_dim = 4
    action_space = ActionSpace(2)

    gravity = 9.8
    masscart = 1.0
    masspole = 0.1
    total_mass = masscart + masspole
    length = 0.5
    polemass_length = masspole * length
    force_mag = 10.0
    tau = 0.02
    theta_threshold = 12.0 * 2.0 * math.pi / 360.0
    x_threshold = 2.4

    def __init__(self, max_steps: int = 500):
        self.max_steps = max_steps

    def reset(self, seed: int) -> EnvState:
        rng = np.random.default_rng(seed)
        physical = tuple(float(v) for v in rng.uniform(-0.05, 0.05, size=4))
        return EnvState(self._observe(physical), physical=physical)

    def _advance(self, physical, action):
        x, x_dot, theta, theta_dot = physical
        force = self.force_mag if action == 1 else -self.force_mag
        cos_t = math.cos(theta)
        sin_t = math.sin(theta)
        temp = (force + self.polemass_length * theta_dot**2 * sin_t) / self.total_mass
        theta_acc = (self.gravity * sin_t - cos_t * temp) / (
            self.length * (4.0 / 3.0 - self.masspole * cos_t**2 / self.total_mass)
        )
        x_acc = temp - self.polemass_length * theta_acc * cos_t / self.total_mass
        x = x + self.tau * x_dot
        x_dot = x_dot + self.tau * x_acc
        theta = theta + self.tau * theta_dot
        theta_dot = theta_dot + self.tau * theta_acc
        terminated = abs(x) > self.x_threshold or abs(theta) > self.theta_threshold
        return (x, x_dot, theta, theta_dot), 1.0, terminated

    def shaped_reward(self, state, next_state, action):
        return 1.0 - abs(next_state.physical[2]) / self.theta_threshold


class Pendulum(Task):
    name = "pendulum"
    obs_dim = 3
    action_space = ActionSpace(12, tuple(-2.0 + 4.0 * i / 11.0 for i in range(12)))

    max_speed = 8.0
    max_torque = 2.0
    dt = 0.05
    g = 10.0
    m = 1.0
    l = 1.0

    def __init__(self, max_steps: int = 200):
        self.max_steps = max_steps

    def torque(self, action: int) -> float:
        return self.action_space.torque_values[action]

    def reset(self, seed: int) -> EnvState:
        rng = np.random.default_rng(seed)
        physical = (float(rng.uniform(-math.pi, math.pi)), float(rng.uniform(-1.0, 1.0)))
        return EnvState(self._observe(physical), physical=physical)

    def _observe(self, physical):
        theta, theta_dot = physical
        return np.array([math.cos(theta), math.sin(theta), theta_dot], dtype=np.float64)

    def cost(self, physical, u: float) -> float:
        """gym pendulum cost; the reward is its negative."""
        theta, theta_dot = physical
        return angle_normalize(theta) ** 2 + 0.1 * theta_dot**2 + 0.001 * u**2

    def integrate(self, physical: tuple[float, float], u: float) -> tuple[float, float]:
        """One Euler step of the pendulum under raw torque ``u``."""
        theta, theta_dot = physical
        u = _clip(u, -self.max_torque, self.max_torque)
        theta_dot = theta_dot + (
            3.0 * self.g / (2.0 * self.l) * math.sin(theta) + 3.0 / (self.m * self.l**2) * u
        ) * self.dt
        theta_dot = _clip(theta_dot, -self.max_speed, self.max_speed)
        return theta + theta_dot * self.dt, theta_dot

    def _advance(self, physical, action):
        u = self.torque(action)
        return self.integrate(physical, u), -self.cost(physical, u), False

    def shaped_reward(self, state, next_state, action):
        # gym's cost is charged on the pre-step state
        return -self.cost(state.physical, self.torque(action))


def make_task(task: str, max_steps: int | None = None) -> Task:
    """Build a task by its string id (``cartpole``, ``mountaincar``, ``pendulum``)."""
    classes = {"cartpole": CartPole, "mountaincar": MountainCar, "pendulum": Pendulum}
    try:
        cls = classes[task]
    except KeyError:
        raise ValueError(f"unknown task {task!r}; expected one of {TASKS}") from None
    return cls() if max_steps is None else cls(max_steps=max_steps)


def shaped_reward(task: str | Task, state: EnvState, next_state: EnvState, action: int) -> float:
    if isinstance(task, str):
        task = make_task(task)
    return task.shaped_reward(state, next_state, action)
