"""Fully connected ReLU Q-network over a flat float64 parameter vector.

Parameters live in one flat vector laid out layer by layer as
``W_1 (in x out, row-major), b_1, W_2, b_2, ...``. Gradients share that
layout, so optimizer arithmetic is plain vector arithmetic.

The ReLU derivative at exactly 0 is taken to be 0.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

_MAGIC = b"QNP1"


class LayoutError(ValueError):
    """Raised when a vector or input does not match the network layout."""


@dataclass(frozen=True)
class Layout:
    """Layer widths ``(n_inputs, hidden..., n_actions)``."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        if len(self.sizes) < 2 or any(int(s) < 1 for s in self.sizes):
            raise LayoutError(f"invalid layer sizes {self.sizes}")
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))

    @classmethod
    def for_task(cls, obs_dim: int, n_actions: int, hidden: int, hidden_layers: int = 1) -> Layout:
        return cls((obs_dim,) + (hidden,) * hidden_layers + (n_actions,))

    @property
    def shapes(self) -> list[tuple[int, int]]:
        return list(zip(self.sizes[:-1], self.sizes[1:]))

    @cached_property
    def slices(self) -> list[tuple[slice, slice]]:
        out, offset = [], 0
        for n_in, n_out in self.shapes:
            w = slice(offset, offset + n_in * n_out)
            offset += n_in * n_out
            b = slice(offset, offset + n_out)
            offset += n_out
            out.append((w, b))
        return out

    @property
    def n_params(self) -> int:
        return sum(n_in * n_out + n_out for n_in, n_out in self.shapes)

    @property
    def first_layer_weights(self) -> slice:
        return self.slices[0][0]

    def unflatten(self, values: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        if values.shape != (self.n_params,):
            raise LayoutError(f"expected {self.n_params} parameters, got shape {values.shape}")
        return [
            (values[w].reshape(n_in, n_out), values[b])
            for (w, b), (n_in, n_out) in zip(self.slices, self.shapes)
        ]


@dataclass(frozen=True, eq=False)
class ParamVector:
    values: np.ndarray
    layout: Layout

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.layout.n_params,):
            raise LayoutError(
                f"expected {self.layout.n_params} parameters, got shape {values.shape}"
            )
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray) -> ParamVector:
        return ParamVector(values, self.layout)

    def to_bytes(self) -> bytes:
        """Serialize as a small shape header followed by little-endian float64 values."""
        sizes = self.layout.sizes
        header = _MAGIC + struct.pack(f"<I{len(sizes)}I", len(sizes), *sizes)
        return header + self.values.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> ParamVector:
        if blob[:4] != _MAGIC:
            raise LayoutError("not a parameter blob")
        (n,) = struct.unpack_from("<I", blob, 4)
        sizes = struct.unpack_from(f"<{n}I", blob, 8)
        layout = Layout(sizes)
        values = np.frombuffer(blob, dtype="<f8", offset=8 + 4 * n)
        if values.size != layout.n_params:
            raise LayoutError("truncated parameter blob")
        return cls(values.astype(np.float64), layout)


def init_params(seed: int, layout: Layout | tuple[int, ...]) -> ParamVector:
    """He-style uniform init: ``W ~ U(-sqrt(6/fan_in), sqrt(6/fan_in))``, zero biases."""
    if not isinstance(layout, Layout):
        layout = Layout(tuple(layout))
    rng = np.random.default_rng(seed)
    values = np.zeros(layout.n_params)
    for (w, _), (n_in, _) in zip(layout.slices, layout.shapes):
        limit = np.sqrt(6.0 / n_in)
        values[w] = rng.uniform(-limit, limit, size=w.stop - w.start)
    return ParamVector(values, layout)


def _check_inputs(layout: Layout, obs: np.ndarray) -> np.ndarray:
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim not in (1, 2) or obs.shape[-1] != layout.sizes[0]:
        raise LayoutError(f"observation shape {obs.shape} does not match input width {layout.sizes[0]}")
    return obs


def _forward_layers(layers, x: np.ndarray):
    """Return (pre-activations of hidden layers, activations incl. input, output)."""
    acts = [x]
    pre = []
    for w, b in layers[:-1]:
        z = acts[-1] @ w + b
        pre.append(z)
        acts.append(np.maximum(z, 0.0))
    w, b = layers[-1]
    return pre, acts, acts[-1] @ w + b


def forward(params: ParamVector, obs: np.ndarray) -> np.ndarray:
    """Q-values for one observation ``(d,)`` or a batch ``(n, d)``."""
    obs = _check_inputs(params.layout, obs)
    return _forward_layers(params.layout.unflatten(params.values), obs)[2]


def batch_q_grads(params: ParamVector, obs: np.ndarray, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample Q(s_n, a_n) and its gradient w.r.t. every parameter.

    Returns ``(q, grads)`` with shapes ``(n,)`` and ``(n, n_params)``.
    """
    layout = params.layout
    obs = np.atleast_2d(_check_inputs(layout, obs))
    actions = np.asarray(actions, dtype=np.intp).reshape(-1)
    n = obs.shape[0]
    if actions.shape[0] != n:
        raise LayoutError("one action per observation required")
    layers = layout.unflatten(params.values)
    pre, acts, q_all = _forward_layers(layers, obs)
    rows = np.arange(n)
    q = q_all[rows, actions]

    grads = np.empty((n, layout.n_params))
    delta = np.zeros((n, layout.sizes[-1]))
    delta[rows, actions] = 1.0
    for k in range(len(layers) - 1, -1, -1):
        w_slice, b_slice = layout.slices[k]
        a_in = acts[k]
        grads[:, w_slice] = (a_in[:, :, None] * delta[:, None, :]).reshape(n, -1)
        grads[:, b_slice] = delta
        if k > 0:
            delta = (delta @ layers[k][0].T) * (pre[k - 1] > 0.0)
    return q, grads


def weighted_q_grad_sum(
    params: ParamVector, obs: np.ndarray, actions: np.ndarray, weights: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """``sum_n weights[n] * grad Q(s_n, a_n)`` in one backward pass; also returns Q(s_n, a_n)."""
    layout = params.layout
    obs = np.atleast_2d(_check_inputs(layout, obs))
    actions = np.asarray(actions, dtype=np.intp).reshape(-1)
    n = obs.shape[0]
    layers = layout.unflatten(params.values)
    pre, acts, q_all = _forward_layers(layers, obs)
    rows = np.arange(n)
    out = np.empty(layout.n_params)
    delta = np.zeros((n, layout.sizes[-1]))
    delta[rows, actions] = weights
    for k in range(len(layers) - 1, -1, -1):
        w_slice, b_slice = layout.slices[k]
        out[w_slice] = (acts[k].T @ delta).reshape(-1)
        out[b_slice] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ layers[k][0].T) * (pre[k - 1] > 0.0)
    return q_all[rows, actions], out


def q_grad(params: ParamVector, obs: np.ndarray, action: int) -> np.ndarray:
    """Gradient of the scalar Q(s, a; params) w.r.t. params, same layout."""
    obs = _check_inputs(params.layout, obs)
    if obs.ndim != 1:
        raise LayoutError("q_grad takes a single observation")
    if not 0 <= int(action) < params.layout.sizes[-1]:
        raise LayoutError(f"action {action} out of range")
    return batch_q_grads(params, obs[None, :], np.array([action]))[1][0]
