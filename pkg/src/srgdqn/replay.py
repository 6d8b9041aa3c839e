"""Transitions, array-packed transition batches and the FIFO replay memory."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np


class Transition(NamedTuple):
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool


@dataclass(frozen=True, eq=False)
class TransitionBatch:
    """Column-wise storage of ``n`` transitions, used for vectorized gradients."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray

    @classmethod
    def from_transitions(cls, transitions: Sequence[Transition]) -> TransitionBatch:
        if len(transitions) == 0:
            raise ValueError("empty transition batch")
        return cls(
            states=np.array([t.state for t in transitions], dtype=np.float64),
            actions=np.array([t.action for t in transitions], dtype=np.intp),
            rewards=np.array([t.reward for t in transitions], dtype=np.float64),
            next_states=np.array([t.next_state for t in transitions], dtype=np.float64),
            terminals=np.array([t.terminal for t in transitions], dtype=bool),
        )

    def __len__(self) -> int:
        return self.actions.shape[0]

    def take(self, index) -> TransitionBatch:
        """Sub-batch by integer index array (or a single integer)."""
        index = np.atleast_1d(np.asarray(index, dtype=np.intp))
        return TransitionBatch(
            self.states[index],
            self.actions[index],
            self.rewards[index],
            self.next_states[index],
            self.terminals[index],
        )

    def transition(self, i: int) -> Transition:
        return Transition(
            self.states[i], int(self.actions[i]), float(self.rewards[i]),
            self.next_states[i], bool(self.terminals[i]),
        )


def as_batch(batch: TransitionBatch | Sequence[Transition] | Transition) -> TransitionBatch:
    if isinstance(batch, TransitionBatch):
        return batch
    if isinstance(batch, Transition):
        return TransitionBatch.from_transitions([batch])
    return TransitionBatch.from_transitions(list(batch))


class ReplayBuffer:
    """Fixed-capacity FIFO memory; the oldest item is evicted first.

    Each stored transition carries an integer tag (the trainer uses its
    position in the full run record) so sampled batches can be traced back.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list = []
        self._tags: list[int] = []
        self._head = 0  # index of the oldest item once full

    def __len__(self) -> int:
        return len(self._items)

    def push(self, item: Transition, tag: int = -1) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
            self._tags.append(tag)
        else:
            self._items[self._head] = item
            self._tags[self._head] = tag
            self._head = (self._head + 1) % self.capacity

    def _order(self) -> list[int]:
        n = len(self._items)
        return [(self._head + i) % n for i in range(n)] if n else []

    @property
    def items(self) -> list:
        """Stored items, oldest first."""
        return [self._items[i] for i in self._order()]

    @property
    def tags(self) -> list[int]:
        return [self._tags[i] for i in self._order()]

    def sample_positions(self, n: int, rng: np.random.Generator, replace: bool | None = None) -> np.ndarray:
        size = len(self._items)
        if size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        if replace is None or n > size:
            replace = n > size
        return rng.choice(size, size=n, replace=replace)

    def sample_batch(self, n: int, rng: np.random.Generator, replace: bool | None = None) -> list:
        """Uniform sample of ``n`` items; with replacement when fewer than ``n`` are stored."""
        return [self._items[i] for i in self.sample_positions(n, rng, replace)]

    def sample_tagged(self, n: int, rng: np.random.Generator) -> tuple[list, list[int]]:
        pos = self.sample_positions(n, rng)
        return [self._items[i] for i in pos], [self._tags[i] for i in pos]
