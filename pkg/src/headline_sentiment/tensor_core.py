"""Small dense kernel with tape-based reverse-mode differentiation.

Only the handful of operations the sentence network needs are provided.
Every op takes an optional :class:`Tape`; when one is given and any input
requires a gradient, the op appends a record with a closure computing the
input gradients.  :func:`backward` replays the records in reverse.

All values are float64.  An op producing NaN/Inf raises
:class:`~headline_sentiment.errors.NumericalError`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NumericalError, ShapeError, ValidationError

COSINE_EPS = 1e-12


class Tensor:
    __slots__ = ("value", "requires_grad", "name")

    def __init__(self, value, requires_grad: bool = False, name: Optional[str] = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def item(self) -> float:
        return float(self.value.reshape(-1)[0])

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"


@dataclass
class RowGrad:
    """Sparse gradient for a row-gathered table: ``values[i]`` adds to row ``ids[i]``."""
    ids: np.ndarray
    values: np.ndarray


@dataclass
class _Record:
    op: str
    output: Tensor
    inputs: tuple
    backward: Callable


class Tape:
    """Ordered log of differentiable ops executed since creation."""

    def __init__(self):
        self.records: list[_Record] = []

    def __len__(self):
        return len(self.records)

    def record(self, op, output, inputs, backward_fn):
        self.records.append(_Record(op, output, tuple(inputs), backward_fn))


def _finish(op: str, value: np.ndarray, inputs: Sequence[Tensor], tape: Optional[Tape],
            backward_fn: Callable) -> Tensor:
    if not np.all(np.isfinite(value)):
        raise NumericalError("non-finite value produced", op=op,
                             input_shapes=[t.shape for t in inputs], output_shape=value.shape)
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(value, requires_grad=needs)
    if tape is not None and needs:
        tape.record(op, out, inputs, backward_fn)
    return out


def _check_rank(op, t: Tensor, rank: int):
    if t.value.ndim != rank:
        raise ShapeError(f"{op}: expected rank-{rank} input, got shape {t.shape}")


def take_rows(table: Tensor, ids, tape: Optional[Tape] = None) -> Tensor:
    """Gather rows ``table[ids]``; the gradient is scattered back sparsely."""
    _check_rank("take_rows", table, 2)
    ids = np.asarray(ids, dtype=np.intp)
    return _finish("take_rows", table.value[ids], [table], tape,
                   lambda g: (RowGrad(ids, g),))


def vstack(parts: Sequence[Tensor], tape: Optional[Tape] = None) -> Tensor:
    if not parts:
        raise ShapeError("vstack: empty list")
    for p in parts:
        _check_rank("vstack", p, 2)
    sizes = [p.shape[0] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def back(g):
        return tuple(g[bounds[i]:bounds[i + 1]] for i in range(len(parts)))

    return _finish("vstack", np.vstack([p.value for p in parts]), parts, tape, back)


def conv1d_valid(x: Tensor, filters: Tensor, bias: Tensor, tape: Optional[Tape] = None) -> Tensor:
    """``out[t, j] = bias[j] + sum_{a, d} x[t + a, d] * filters[j, a, d]``.

    ``x`` is (L, D), ``filters`` is (K, k, D), ``bias`` is (K,); the result
    is (L - k + 1, K).
    """
    _check_rank("conv1d_valid", x, 2)
    _check_rank("conv1d_valid", filters, 3)
    n_filters, width, depth = filters.shape
    length = x.shape[0]
    if x.shape[1] != depth:
        raise ShapeError(f"conv1d_valid: input depth {x.shape[1]} != filter depth {depth}")
    if bias.shape != (n_filters,):
        raise ShapeError(f"conv1d_valid: bias shape {bias.shape} != ({n_filters},)")
    if length < width:
        raise ShapeError(f"conv1d_valid: sequence length {length} < filter width {width}")
    # (T, D, k) -> (T, k, D)
    windows = sliding_window_view(x.value, width, axis=0).transpose(0, 2, 1)
    flat = windows.reshape(windows.shape[0], -1)
    w_flat = filters.value.reshape(n_filters, -1)
    out = flat @ w_flat.T + bias.value

    def back(g):
        g_filters = (g.T @ flat).reshape(filters.shape)
        g_bias = g.sum(axis=0)
        g_x = np.zeros_like(x.value)
        n_out = g.shape[0]
        for a in range(width):
            g_x[a:a + n_out] += g @ filters.value[:, a, :]
        return g_x, g_filters, g_bias

    return _finish("conv1d_valid", out, [x, filters, bias], tape, back)


def global_max_pool(x: Tensor, tape: Optional[Tape] = None) -> Tensor:
    """Column-wise max of a (T, K) input; ties route gradient to the first row."""
    _check_rank("global_max_pool", x, 2)
    if x.shape[0] == 0:
        raise ShapeError("global_max_pool: empty sequence")
    idx = np.argmax(x.value, axis=0)
    cols = np.arange(x.shape[1])

    def back(g):
        gx = np.zeros_like(x.value)
        gx[idx, cols] = g
        return (gx,)

    return _finish("global_max_pool", x.value[idx, cols], [x], tape, back)


def dense(x: Tensor, weights: Tensor, bias: Tensor, tape: Optional[Tape] = None) -> Tensor:
    """``weights @ x + bias`` for a vector ``x``."""
    _check_rank("dense", x, 1)
    _check_rank("dense", weights, 2)
    if weights.shape[1] != x.shape[0] or bias.shape != (weights.shape[0],):
        raise ShapeError(
            f"dense: input {x.shape}, weights {weights.shape}, bias {bias.shape} mismatch")

    def back(g):
        return weights.value.T @ g, np.outer(g, x.value), g

    return _finish("dense", weights.value @ x.value + bias.value, [x, weights, bias], tape, back)


def relu(x: Tensor, tape: Optional[Tape] = None) -> Tensor:
    on = x.value > 0
    return _finish("relu", np.where(on, x.value, 0.0), [x], tape, lambda g: (g * on,))


def tanh_act(x: Tensor, tape: Optional[Tape] = None) -> Tensor:
    y = np.tanh(x.value)
    return _finish("tanh", y, [x], tape, lambda g: (g * (1.0 - y * y),))


def dropout(x: Tensor, rate: float, training: bool, rng: Optional[np.random.Generator] = None,
            tape: Optional[Tape] = None) -> Tensor:
    """Inverted dropout: survivors are scaled by ``1 / (1 - rate)`` at train time."""
    if not 0.0 <= rate < 1.0:
        raise ValidationError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValidationError("dropout in training mode needs an rng")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _finish("dropout", x.value * keep, [x], tape, lambda g: (g * keep,))


def concat(parts: Sequence[Tensor], tape: Optional[Tape] = None) -> Tensor:
    if not parts:
        raise ShapeError("concat: empty list")
    for p in parts:
        _check_rank("concat", p, 1)
    bounds = np.cumsum([0] + [p.shape[0] for p in parts])

    def back(g):
        return tuple(g[bounds[i]:bounds[i + 1]] for i in range(len(parts)))

    return _finish("concat", np.concatenate([p.value for p in parts]), parts, tape, back)


def total(x: Tensor, tape: Optional[Tape] = None) -> Tensor:
    """Sum of all elements, as a 0-d tensor."""
    return _finish("sum", np.asarray(x.value.sum()), [x], tape,
                   lambda g: (np.full(x.shape, float(g)),))


def cosine_distance(pred: Tensor, target: Tensor, tape: Optional[Tape] = None) -> Tensor:
    """``1 - cos(pred, target)`` as a 0-d tensor.

    A prediction vector with norm below ``COSINE_EPS`` yields 1 with a zero
    gradient.
    """
    _check_rank("cosine_distance", pred, 1)
    if pred.shape != target.shape:
        raise ShapeError(f"cosine_distance: {pred.shape} vs {target.shape}")
    p, t = pred.value, target.value
    np_, nt = np.linalg.norm(p), np.linalg.norm(t)
    if nt < COSINE_EPS:
        raise ValidationError("cosine_distance: all-zero target vector")
    if np_ < COSINE_EPS:
        return _finish("cosine_distance", np.asarray(1.0), [pred, target], tape,
                       lambda g: (np.zeros_like(p), np.zeros_like(t)))
    dot = float(p @ t)
    cos = dot / (np_ * nt)

    def back(g):
        g = float(g)
        gp = -(t / (np_ * nt) - cos * p / (np_ * np_))
        gt = -(p / (np_ * nt) - cos * t / (nt * nt))
        return g * gp, g * gt

    return _finish("cosine_distance", np.asarray(1.0 - cos), [pred, target], tape, back)


def backward(tape: Tape, loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Gradients of a scalar ``loss`` for every grad-requiring leaf on the tape.

    Leaves that the loss does not reach get zero gradients.
    """
    if loss.value.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    produced = {id(r.output) for r in tape.records}
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
    leaves: dict[int, Tensor] = {}
    owned: set[int] = set()  # buffers safe to update in place

    def accumulate(t: Tensor, g):
        if isinstance(g, RowGrad):
            key = id(t)
            if key not in owned:
                prev = grads.get(key)
                grads[key] = np.zeros_like(t.value) if prev is None else prev.copy()
                owned.add(key)
            np.add.at(grads[key], g.ids, g.values)
            return
        prev = grads.get(id(t))
        if prev is None:
            grads[id(t)] = g
        elif id(t) in owned:
            prev += g
        else:
            grads[id(t)] = prev + g
            owned.add(id(t))

    for rec in tape.records:
        for t in rec.inputs:
            if t.requires_grad and id(t) not in produced:
                leaves[id(t)] = t
    for rec in reversed(tape.records):
        g = grads.get(id(rec.output))
        if g is None:
            continue
        for t, gi in zip(rec.inputs, rec.backward(g)):
            if gi is not None and t.requires_grad:
                accumulate(t, gi)
    return {t: grads.get(key, np.zeros_like(t.value)) for key, t in leaves.items()}
