"""A small reverse-mode differentiation engine over dense 2-D float64 arrays.

Operations executed inside ``with Tape() as tape:`` are recorded in order;
:func:`backward` then walks the records in exact reverse.  Outside a tape the
same functions run as plain numpy code with nothing recorded.

    >>> x = Tensor(np.ones((2, 2)), requires_grad=True)
    >>> with Tape() as tape:
    ...     loss = sum_all(scale(x, 3.0))
    >>> backward(tape, loss)
    >>> x.grad
    array([[3., 3.],
           [3., 3.]])

Gradients of leaf tensors accumulate across repeated ``backward`` calls until
:meth:`Tensor.zero_grad` (or an optimizer step) clears them.
"""

from __future__ import annotations

import contextvars
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import rng as rngmod
from .graph import SparseOperator, segment_sum


class ShapeError(ValueError):
    pass


_ACTIVE: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar("fagcn_tape", default=None)


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "tape_id", "name")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        v = np.array(value, dtype=np.float64)
        if v.ndim == 0:
            v = v.reshape(1, 1)
        elif v.ndim == 1:
            v = v.reshape(-1, 1)
        elif v.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got {v.ndim} dimensions")
        self.value = v
        self.grad = np.zeros_like(v)
        self.requires_grad = requires_grad
        self.tape_id: int | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.value)

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError("item() needs a 1x1 tensor")
        return float(self.value[0, 0])

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"


@dataclass
class _Node:
    out: Tensor
    inputs: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tape:
    """Ordered record of differentiable operations."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE.set(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE.reset(self._token)
        self._token = None
        return False

    def __len__(self):
        return len(self.nodes)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(value: np.ndarray, inputs: tuple[Tensor, ...], rule) -> Tensor:
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(value, requires_grad=needs)
    tape = _ACTIVE.get()
    if tape is not None and needs:
        out.tape_id = len(tape.nodes)
        tape.nodes.append(_Node(out, inputs, rule))
    return out


def backward(tape: Tape, loss: Tensor) -> None:
    """Populate ``.grad`` of every ``requires_grad`` tensor reachable from ``loss``."""
    if loss.shape != (1, 1):
        raise ShapeError(f"loss must be a 1x1 tensor, got shape {loss.shape}")
    if loss.tape_id is None or loss.tape_id >= len(tape.nodes) or tape.nodes[loss.tape_id].out is not loss:
        raise ValueError("loss was not recorded on this tape")
    cot: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    for node in reversed(tape.nodes[: loss.tape_id + 1]):
        g = cot.pop(id(node.out), None)
        if g is None:
            continue
        node.out.grad += g
        grads = node.backward(g)
        for t, gi in zip(node.inputs, grads):
            if gi is None or not t.requires_grad:
                continue
            if t.tape_id is None:
                t.grad += gi
            else:
                key = id(t)
                cot[key] = cot[key] + gi if key in cot else gi


# --- primitives -----------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} and {b.shape} do not align")
    av, bv = a.value, b.value
    return _record(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"add shapes {a.shape} and {b.shape} differ")
    return _record(a.value + b.value, (a, b), lambda g: (g, g))


def add_bias(a: Tensor, bias: Tensor) -> Tensor:
    """Add a ``1 x C`` row vector to every row of ``a``."""
    a, bias = _as_tensor(a), _as_tensor(bias)
    if bias.shape != (1, a.shape[1]):
        raise ShapeError(f"bias shape {bias.shape} does not fit {a.shape}")
    return _record(a.value + bias.value, (a, bias), lambda g: (g, g.sum(axis=0, keepdims=True)))


def scale(a: Tensor, c) -> Tensor:
    """Multiply by a constant: a scalar, a per-row column ``(N, 1)`` or a full array."""
    a = _as_tensor(a)
    c = np.asarray(c, dtype=np.float64)
    if c.ndim and c.shape not in (a.shape, (a.shape[0], 1)):
        raise ShapeError(f"scale factor shape {c.shape} does not fit {a.shape}")
    return _record(a.value * c, (a,), lambda g: (g * c,))


def relu(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    mask = a.value > 0
    return _record(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def tanh(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    y = np.tanh(a.value)
    return _record(y, (a,), lambda g: (g * (1.0 - y * y),))


def dropout(a: Tensor, rate: float, seed: int, train: bool) -> Tensor:
    """Inverted dropout: survivors are scaled by ``1 / (1 - rate)``; identity in eval."""
    a = _as_tensor(a)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return a
    keep = rngmod.uniform(rngmod.make_rng(seed, rngmod.DROPOUT), a.shape) >= rate
    m = keep / (1.0 - rate)
    return _record(a.value * m, (a,), lambda g: (g * m,))


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"concat_cols row counts {a.shape[0]} and {b.shape[0]} differ")
    k = a.shape[1]
    return _record(np.concatenate([a.value, b.value], axis=1), (a, b), lambda g: (g[:, :k], g[:, k:]))


def gather_rows(a: Tensor, index) -> Tensor:
    a = _as_tensor(a)
    idx = np.asarray(index, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError("row index must be 1-D")
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise IndexError("row index out of range")
    n = a.shape[0]

    def rule(g):
        out = np.zeros((n, g.shape[1]))
        np.add.at(out, idx, g)
        return (out,)

    return _record(a.value[idx], (a,), rule)


def _scatter(rows: np.ndarray, target: np.ndarray, n: int, offsets) -> np.ndarray:
    if offsets is not None:
        return segment_sum(rows, offsets)
    out = np.zeros((n, rows.shape[1]))
    np.add.at(out, target, rows)
    return out


def edge_scatter_sum(edge_values: Tensor, messages: Tensor, target_index, num_nodes: int) -> Tensor:
    """``out[i] = sum over arcs a with target[a] == i of edge_values[a] * messages[a]``.

    ``edge_values`` is ``(E, 1)``, ``messages`` is ``(E, F)``.  When
    ``target_index`` is sorted the sum runs arc by arc in storage order.
    """
    w, m = _as_tensor(edge_values), _as_tensor(messages)
    tgt = np.asarray(target_index, dtype=np.int64)
    e = tgt.shape[0]
    if w.shape != (e, 1) or m.shape[0] != e:
        raise ShapeError(f"edge tensors {w.shape}, {m.shape} do not match {e} arcs")
    if e and (tgt.min() < 0 or tgt.max() >= num_nodes):
        raise IndexError("target index out of range")
    offsets = None
    if e == 0 or np.all(tgt[1:] >= tgt[:-1]):
        offsets = np.searchsorted(tgt, np.arange(num_nodes + 1), side="left")
    wv, mv = w.value, m.value
    out = _scatter(wv * mv, tgt, num_nodes, offsets)

    def rule(g):
        gt = g[tgt]
        return (np.sum(gt * mv, axis=1, keepdims=True), gt * wv)

    return _record(out, (w, m), rule)


def sparse_matmul(op: SparseOperator, a: Tensor) -> Tensor:
    """``op @ a`` for a fixed sparse operator (constant, not differentiated)."""
    a = _as_tensor(a)
    if a.shape[0] != op.num_nodes:
        raise ShapeError(f"operator size {op.num_nodes} does not match {a.shape[0]} rows")
    src, dst, wts, diag = op.arc_sources, op.col_indices, op.weights[:, None], op.diagonal[:, None]

    def apply(x):
        return segment_sum(wts * x[dst], op.row_offsets) + diag * x

    def rule(g):
        out = np.zeros_like(g)
        np.add.at(out, dst, wts * g[src])
        return (out + diag * g,)

    return _record(apply(a.value), (a,), rule)


def sum_all(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    shape = a.shape
    return _record(np.array([[a.value.sum()]]), (a,), lambda g: (np.full(shape, g[0, 0]),))


def softmax_cross_entropy(logits: Tensor, labels, mask) -> Tensor:
    """Mean negative log-likelihood of ``labels`` over the rows selected by ``mask``."""
    z = _as_tensor(logits)
    y = np.asarray(labels, dtype=np.int64)
    sel = np.asarray(mask, dtype=bool)
    n, k = z.shape
    if k < 2:
        raise ShapeError("need at least two classes")
    if y.shape != (n,) or sel.shape != (n,):
        raise ShapeError("labels and mask must have one entry per row")
    rows = np.flatnonzero(sel)
    if rows.size == 0:
        raise ValueError("mask selects no nodes")
    zs = z.value[rows]
    shifted = zs - zs.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    ys = y[rows]
    loss = -logp[np.arange(rows.size), ys].mean()

    def rule(g):
        p = np.exp(logp)
        p[np.arange(rows.size), ys] -= 1.0
        out = np.zeros((n, k))
        out[rows] = p * (g[0, 0] / rows.size)
        return (out,)

    return _record(np.array([[loss]]), (z,), rule)
