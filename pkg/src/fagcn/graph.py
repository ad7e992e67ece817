"""Undirected graphs in CSR form, normalized operators and label assortativity."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np


class GraphError(ValueError):
    """Raised for malformed graph input."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected graph.

    Each undirected edge ``{i, j}`` is stored twice, as arcs ``(i, j)`` and
    ``(j, i)``.  Column indices are sorted within each row and there are no
    self-loops or duplicate arcs.
    """

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray

    @cached_property
    def degrees(self) -> np.ndarray:
        return _frozen(np.diff(self.row_offsets))

    @property
    def num_arcs(self) -> int:
        return int(self.col_indices.shape[0])

    @property
    def num_edges(self) -> int:
        return self.num_arcs // 2

    @cached_property
    def arc_sources(self) -> np.ndarray:
        """Row (receiving node) of every arc, in CSR order."""
        return _frozen(np.repeat(np.arange(self.num_nodes), self.degrees))

    @cached_property
    def inv_sqrt_degrees(self) -> np.ndarray:
        d = self.degrees.astype(np.float64)
        out = np.zeros(self.num_nodes)
        nz = d > 0
        out[nz] = 1.0 / np.sqrt(d[nz])
        return _frozen(out)

    @cached_property
    def arc_norm(self) -> np.ndarray:
        """``1 / sqrt(d_i d_j)`` for every arc ``(i, j)``."""
        s = self.inv_sqrt_degrees
        return _frozen(s[self.arc_sources] * s[self.col_indices])

    def edges(self) -> np.ndarray:
        """Undirected edge list ``(i, j)`` with ``i < j``, shape ``(M, 2)``."""
        src, dst = self.arc_sources, self.col_indices
        keep = src < dst
        return np.stack([src[keep], dst[keep]], axis=1)

    def arcs(self) -> np.ndarray:
        return np.stack([self.arc_sources, self.col_indices], axis=1)

    def neighbors(self, i: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[i]:self.row_offsets[i + 1]]

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        a[self.arc_sources, self.col_indices] = 1.0
        return a

    def same_structure(self, other: "Graph") -> bool:
        return (
            self.num_nodes == other.num_nodes
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
        )


def build_graph(edge_list: Iterable, num_nodes: int) -> Graph:
    """Build a :class:`Graph` from (possibly duplicated, directed) pairs.

    Pairs are symmetrized, duplicates merged and self-loops dropped.
    Raises :class:`GraphError` when a node id falls outside ``[0, num_nodes)``.
    """
    n = int(num_nodes)
    if n < 0:
        raise GraphError(f"num_nodes must be non-negative, got {num_nodes}")
    e = np.asarray(list(edge_list) if not isinstance(edge_list, np.ndarray) else edge_list)
    if e.size == 0:
        e = np.zeros((0, 2), dtype=np.int64)
    if e.ndim != 2 or e.shape[1] != 2:
        raise GraphError("edge list must be a sequence of (i, j) pairs")
    if not np.issubdtype(e.dtype, np.integer):
        if not np.all(np.equal(np.mod(e, 1), 0)):
            raise GraphError("node ids must be integers")
    e = e.astype(np.int64)
    if e.size and (e.min() < 0 or e.max() >= n):
        bad = e[(e < 0).any(axis=1) | (e >= n).any(axis=1)][0]
        raise GraphError(f"edge ({bad[0]}, {bad[1]}) has a node id outside [0, {n})")
    e = e[e[:, 0] != e[:, 1]]
    arcs = np.concatenate([e, e[:, ::-1]], axis=0)
    # row-major key gives sorted rows with sorted columns; unique dedups
    keys = np.unique(arcs[:, 0] * max(n, 1) + arcs[:, 1])
    src = keys // max(n, 1)
    dst = keys % max(n, 1)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.add.at(offsets, src + 1, 1)
    offsets = np.cumsum(offsets)
    return Graph(n, _frozen(offsets), _frozen(dst.astype(np.int64)))


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Weighted square operator sharing the CSR layout of a graph.

    ``diagonal`` holds explicit diagonal entries (zero when absent) so that
    Laplacians and self-loop filters keep their loop-free arc layout.
    """

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    weights: np.ndarray
    diagonal: np.ndarray

    @cached_property
    def arc_sources(self) -> np.ndarray:
        return _frozen(np.repeat(np.arange(self.num_nodes), np.diff(self.row_offsets)))

    def to_dense(self) -> np.ndarray:
        m = np.zeros((self.num_nodes, self.num_nodes))
        m[self.arc_sources, self.col_indices] = self.weights
        m[np.diag_indices(self.num_nodes)] += self.diagonal
        return m

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        if not (np.array_equal(self.row_offsets, other.row_offsets)
                and np.array_equal(self.col_indices, other.col_indices)):
            raise GraphError("operators must share a sparsity pattern")
        return SparseOperator(self.num_nodes, self.row_offsets, self.col_indices,
                              _frozen(self.weights + other.weights),
                              _frozen(self.diagonal + other.diagonal))

    def scaled(self, c: float) -> "SparseOperator":
        return SparseOperator(self.num_nodes, self.row_offsets, self.col_indices,
                              _frozen(c * self.weights), _frozen(c * self.diagonal))


def identity_operator(g: Graph) -> SparseOperator:
    return SparseOperator(g.num_nodes, g.row_offsets, g.col_indices,
                          _frozen(np.zeros(g.num_arcs)), _frozen(np.ones(g.num_nodes)))


def sym_norm_adjacency(g: Graph) -> SparseOperator:
    """``D^{-1/2} A D^{-1/2}``; isolated nodes get empty rows."""
    return SparseOperator(g.num_nodes, g.row_offsets, g.col_indices,
                          g.arc_norm, _frozen(np.zeros(g.num_nodes)))


def normalized_laplacian(g: Graph) -> SparseOperator:
    """``I - D^{-1/2} A D^{-1/2}`` with an explicit unit diagonal."""
    return SparseOperator(g.num_nodes, g.row_offsets, g.col_indices,
                          _frozen(-g.arc_norm), _frozen(np.ones(g.num_nodes)))


def gcn_filter(g: Graph) -> SparseOperator:
    """Renormalized filter ``(D+I)^{-1/2} (A+I) (D+I)^{-1/2}``."""
    s = 1.0 / np.sqrt(g.degrees + 1.0)
    w = s[g.arc_sources] * s[g.col_indices]
    return SparseOperator(g.num_nodes, g.row_offsets, g.col_indices,
                          _frozen(w), _frozen(s * s))


def segment_sum(values: np.ndarray, row_offsets: np.ndarray) -> np.ndarray:
    """Sum consecutive row blocks of ``values`` delimited by ``row_offsets``.

    Each block is summed sequentially in storage order, so results are
    reproducible bit for bit.
    """
    n = row_offsets.shape[0] - 1
    out = np.zeros((n,) + values.shape[1:])
    counts = np.diff(row_offsets)
    nonempty = counts > 0
    if values.shape[0] and nonempty.any():
        out[nonempty] = np.add.reduceat(values, row_offsets[:-1][nonempty], axis=0)
    return out


def spmm(op: SparseOperator, x: np.ndarray) -> np.ndarray:
    """Exact product ``op @ x`` for a dense ``N x F`` matrix.

    Within each row the arc contributions are accumulated in ascending column
    order, then the diagonal term is added.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if x.shape[0] != op.num_nodes:
        raise ValueError(f"row count {x.shape[0]} does not match operator size {op.num_nodes}")
    contrib = op.weights[:, None] * x[op.col_indices]
    out = segment_sum(contrib, op.row_offsets) + op.diagonal[:, None] * x
    return out[:, 0] if squeeze else out


def label_assortativity(g: Graph, labels) -> float:
    """Newman's discrete assortativity coefficient of node labels.

    Built from the symmetric mixing matrix ``e`` over edge ends:
    ``r = (tr e - sum(a^2)) / (1 - sum(a^2))`` with ``a = e.sum(1)``.  When
    every edge end carries one label the ratio is 0/0; that fully intra-class
    case is reported as 1.0.
    """
    y = np.asarray(labels)
    if y.shape != (g.num_nodes,):
        raise ValueError(f"labels must have length {g.num_nodes}")
    if g.num_edges == 0:
        raise GraphError("assortativity is undefined on a graph without edges")
    classes, idx = np.unique(y, return_inverse=True)
    k = classes.shape[0]
    mix = np.zeros((k, k))
    np.add.at(mix, (idx[g.arc_sources], idx[g.col_indices]), 1.0)
    mix /= mix.sum()
    a = mix.sum(axis=1)
    trace = np.trace(mix)
    sq = float(a @ a)
    if np.isclose(1.0 - sq, 0.0):
        return 1.0
    return float((trace - sq) / (1.0 - sq))
