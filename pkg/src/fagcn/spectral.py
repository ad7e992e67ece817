"""Spectral view of the graph: Laplacian eigenbasis, Fourier transform and filters.

The low- and high-pass filters

    F_L = eps*I + D^{-1/2} A D^{-1/2} = (eps + 1) I - L
    F_H = eps*I - D^{-1/2} A D^{-1/2} = (eps - 1) I + L

have kernels ``eps + 1 - lam`` and ``eps - 1 + lam``.  They can be applied
either through the eigenbasis (``U g(Lambda) U^T x``) or directly in the
vertex domain; the two routes are kept independent so each checks the other.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .graph import Graph, SparseOperator, spmm, sym_norm_adjacency

DEFAULT_MAX_N = 2000


class SpectralError(RuntimeError):
    pass


class FilterKind(str, enum.Enum):
    LOW = "low"
    HIGH = "high"
    LOW_SQUARED = "low_squared"
    HIGH_SQUARED = "high_squared"
    GCN = "gcn"
    GCN_SQUARED = "gcn_squared"

    @property
    def squared(self) -> bool:
        return self.value.endswith("_squared")

    @property
    def base(self) -> "FilterKind":
        return FilterKind(self.value.replace("_squared", ""))


@dataclass(frozen=True)
class FilterSpec:
    kind: FilterKind
    epsilon: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", FilterKind(self.kind))
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.T


def _round_robin(m: int):
    """Tournament schedule: ``m - 1`` rounds of ``m / 2`` disjoint pairs (m even)."""
    players = list(range(m))
    for _ in range(m - 1):
        yield [(players[k], players[m - 1 - k]) for k in range(m // 2)]
        players = [players[0], players[-1]] + players[1:-1]


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Rotations are ordered round-robin so that every round touches disjoint
    index pairs; those rotations commute and are applied together as one
    orthogonal similarity.  Stops when the off-diagonal Frobenius norm drops
    below ``tol * max(1, ||A||_F)``.

    Returns unsorted ``(diag, V)`` with ``A = V diag V^T``.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, atol=1e-12, rtol=0):
        raise SpectralError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    if n < 2:
        return np.diag(a).copy(), v
    m = n + (n % 2)
    schedule = []
    for pairs in _round_robin(m):
        pq = np.array([(min(p, q), max(p, q)) for p, q in pairs if max(p, q) < n])
        if pq.size:
            schedule.append((pq[:, 0], pq[:, 1]))
    threshold = tol * max(1.0, np.linalg.norm(a))

    def off(mat):
        return np.linalg.norm(mat - np.diag(np.diag(mat)))

    for _ in range(max_sweeps):
        if off(a) < threshold:
            return np.diag(a).copy(), v
        for p, q in schedule:
            apq = a[p, q]
            active = np.abs(apq) > 1e-300
            if not active.any():
                continue
            app, aqq = a[p, p], a[q, q]
            theta = np.where(active, (aqq - app) / (2.0 * np.where(active, apq, 1.0)), 0.0)
            t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(1.0, theta))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            # columns then rows: A <- J^T A J
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * ap - s * aq
            a[:, q] = s * ap + c * aq
            ap, aq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = s[:, None] * ap + c[:, None] * aq
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
    if off(a) < threshold:
        return np.diag(a).copy(), v
    raise SpectralError(f"Jacobi iteration did not converge within {max_sweeps} sweeps")


def _canonical_signs(u: np.ndarray) -> np.ndarray:
    u = u.copy()
    for k in range(u.shape[1]):
        nz = np.flatnonzero(np.abs(u[:, k]) > 1e-12)
        if nz.size and u[nz[0], k] < 0:
            u[:, k] = -u[:, k]
    return u


def eigendecompose(lap: SparseOperator, max_n: int = DEFAULT_MAX_N) -> SpectralDecomposition:
    """Ascending eigenpairs of a symmetric operator (normally the Laplacian).

    Each eigenvector's first entry with magnitude above 1e-12 is positive.
    """
    if lap.num_nodes > max_n:
        raise SpectralError(f"{lap.num_nodes} nodes exceeds the dense solver cap of {max_n}")
    w, v = jacobi_eigh(lap.to_dense())
    order = np.argsort(w, kind="stable")
    w, v = w[order], _canonical_signs(v[:, order])
    w.flags.writeable = False
    v.flags.writeable = False
    return SpectralDecomposition(w, v)


def graph_fourier(dec: SpectralDecomposition, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != dec.n:
        raise ValueError(f"signal length {x.shape[0]} does not match {dec.n} nodes")
    return dec.eigenvectors.T @ x


def inverse_fourier(dec: SpectralDecomposition, xhat: np.ndarray) -> np.ndarray:
    xhat = np.asarray(xhat, dtype=np.float64)
    if xhat.shape[0] != dec.n:
        raise ValueError(f"coefficient length {xhat.shape[0]} does not match {dec.n} nodes")
    return dec.eigenvectors @ xhat


def _kernel(kind: FilterKind, eps: float, lam):
    base = kind.base
    if base is FilterKind.LOW:
        g = eps + 1.0 - lam
    elif base is FilterKind.HIGH:
        g = eps - 1.0 + lam
    else:
        g = 1.0 - lam
    return g * g if kind.squared else g


def filter_response(spec: FilterSpec, lam) -> float | np.ndarray:
    """Amplitude ``g(lam)`` of a filter kernel at eigenvalue(s) ``lam`` in [0, 2]."""
    arr = np.asarray(lam, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr > 2.0) or np.any(~np.isfinite(arr)):
        raise ValueError(f"eigenvalue must lie in [0, 2], got {lam}")
    out = _kernel(spec.kind, spec.epsilon, arr)
    return float(out) if arr.ndim == 0 else out


def apply_filter_spectral(dec: SpectralDecomposition, spec: FilterSpec, x: np.ndarray) -> np.ndarray:
    """``U diag(g(lambda)) U^T x``, column by column."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != dec.n:
        raise ValueError(f"signal has {x.shape[0]} rows, decomposition has {dec.n}")
    # eigenvalues may sit a hair outside [0, 2]
    lam = np.clip(dec.eigenvalues, 0.0, 2.0)
    g = _kernel(spec.kind, spec.epsilon, lam)
    xhat = dec.eigenvectors.T @ x
    scaled = g[:, None] * xhat if x.ndim == 2 else g * xhat
    return dec.eigenvectors @ scaled


def apply_filter_spatial(g: Graph, spec: FilterSpec, x: np.ndarray) -> np.ndarray:
    """Vertex-domain filtering: ``eps*x +/- A_hat x``, twice for squared kinds.

    ``gcn`` kinds apply ``A_hat = I - L`` with no ``eps`` term.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != g.num_nodes:
        raise ValueError(f"signal has {x.shape[0]} rows, graph has {g.num_nodes} nodes")
    adj = sym_norm_adjacency(g)
    base, eps = spec.kind.base, spec.epsilon

    def once(z):
        az = spmm(adj, z)
        if base is FilterKind.LOW:
            return eps * z + az
        if base is FilterKind.HIGH:
            return eps * z - az
        return az

    out = once(x)
    return once(out) if spec.kind.squared else out


def signal_distances(h_u, h_v, epsilon: float):
    """Distances between a connected pair before and after low/high-pass mixing.

    Returns ``(D, D_L, D_H)`` where ``D = ||h_u - h_v||``, ``D_L`` is the
    distance between ``eps*h_u + h_v`` and ``eps*h_v + h_u`` and ``D_H`` the
    distance between ``eps*h_u - h_v`` and ``eps*h_v - h_u``.
    """
    h_u = np.asarray(h_u, dtype=np.float64)
    h_v = np.asarray(h_v, dtype=np.float64)
    if h_u.shape != h_v.shape:
        raise ValueError("feature vectors must have equal length")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    d = np.linalg.norm(h_u - h_v)
    d_low = np.linalg.norm((epsilon * h_u + h_v) - (epsilon * h_v + h_u))
    d_high = np.linalg.norm((epsilon * h_u - h_v) - (epsilon * h_v - h_u))
    return float(d), float(d_low), float(d_high)
