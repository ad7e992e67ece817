"""FAGCN and the comparison models (GCN, MLP, fixed low/high-pass probes).

FAGCN maps raw features through ``h0 = relu(x W1)``, then runs ``L`` rounds
of signed, degree-normalized aggregation

    h_i^(l) = eps * h0_i + sum_{j in N(i)} alpha_ij / sqrt(d_i d_j) * h_j^(l-1)
    alpha_ij = tanh(g_l . [h_i^(l-1) || h_j^(l-1)])

and classifies with ``h^(L) W2``.  A positive coefficient mixes in the
neighbor (low-pass), a negative one subtracts it (high-pass).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import rng as rngmod
from .autodiff import Tensor
from .graph import Graph, gcn_filter
from .spectral import FilterKind, FilterSpec, apply_filter_spatial

GATE_INIT_SCALE = 0.1


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, gain: float = 1.0) -> np.ndarray:
    limit = gain * np.sqrt(6.0 / (fan_in + fan_out))
    return (2.0 * rngmod.uniform(rng, (fan_in, fan_out)) - 1.0) * limit


def _check_mode(mode: str) -> bool:
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    return mode == "train"


def _dropout(t: Tensor, rate: float, train: bool, rng):
    if not train or rate == 0.0:
        return t
    if rng is None:
        raise ValueError("train-mode dropout needs a random generator")
    return ad.dropout(t, rate, rngmod.child_seed(rng), True)


@dataclass(frozen=True, eq=False)
class EdgeCoefficients:
    """Per-arc gate values, aligned with the graph's CSR arc order."""

    alpha: np.ndarray

    @property
    def low(self) -> np.ndarray:
        return (1.0 + self.alpha) / 2.0

    @property
    def high(self) -> np.ndarray:
        return (1.0 - self.alpha) / 2.0


@dataclass
class LayerTrace:
    hidden: list[np.ndarray] = field(default_factory=list)
    coefficients: list[EdgeCoefficients] = field(default_factory=list)


@dataclass
class FAGCNParams:
    W1: Tensor
    W2: Tensor
    gates: list[Tensor]
    epsilon: float = 0.3
    dropout_rate: float = 0.5
    gates_from_h0: bool = False
    trained: bool = False

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not self.gates:
            raise ValueError("FAGCN needs at least one layer")
        f_hidden = self.W1.shape[1]
        if self.W2.shape[0] != f_hidden:
            raise ValueError("W1 and W2 hidden sizes disagree")
        if any(g.shape != (2 * f_hidden, 1) for g in self.gates):
            raise ValueError(f"gate vectors must have length {2 * f_hidden}")

    @property
    def num_layers(self) -> int:
        return len(self.gates)

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[1]

    def tensors(self) -> dict[str, Tensor]:
        out = {"W1": self.W1, "W2": self.W2}
        out.update({f"gate{l}": g for l, g in enumerate(self.gates, start=1)})
        return out

    def hyperparameters(self) -> dict:
        return {"model": "fagcn", "epsilon": self.epsilon, "dropout": self.dropout_rate,
                "num_layers": self.num_layers, "hidden_dim": self.hidden_dim,
                "gates_from_h0": self.gates_from_h0}


def init_fagcn(num_features: int, num_classes: int, hidden_dim: int = 16, num_layers: int = 2,
               epsilon: float = 0.3, dropout: float = 0.5, seed: int = 0,
               gates_from_h0: bool = False) -> FAGCNParams:
    r = rngmod.make_rng(seed, rngmod.INIT)
    W1 = Tensor(glorot(r, num_features, hidden_dim), requires_grad=True, name="W1")
    W2 = Tensor(glorot(r, hidden_dim, num_classes), requires_grad=True, name="W2")
    gates = [Tensor(GATE_INIT_SCALE * glorot(r, 2 * hidden_dim, 1), requires_grad=True, name=f"gate{l + 1}")
             for l in range(num_layers)]
    return FAGCNParams(W1, W2, gates, epsilon=epsilon, dropout_rate=dropout, gates_from_h0=gates_from_h0)


def edge_gate(h: Tensor, g: Graph, gate_vec: Tensor) -> Tensor:
    """``tanh(gate . [h_i || h_j])`` for every stored arc ``(i, j)``; shape ``(E, 1)``."""
    if gate_vec.shape != (2 * h.shape[1], 1):
        raise ad.ShapeError(f"gate vector shape {gate_vec.shape} does not fit hidden size {h.shape[1]}")
    if h.shape[0] != g.num_nodes:
        raise ad.ShapeError(f"hidden matrix has {h.shape[0]} rows, graph has {g.num_nodes} nodes")
    pair = ad.concat_cols(ad.gather_rows(h, g.arc_sources), ad.gather_rows(h, g.col_indices))
    return ad.tanh(ad.matmul(pair, gate_vec))


def fagcn_propagate(h_prev: Tensor, h0: Tensor, alpha: Tensor, g: Graph, epsilon: float) -> Tensor:
    """One signed aggregation round anchored on ``eps * h0``."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if h_prev.shape != h0.shape or h0.shape[0] != g.num_nodes:
        raise ad.ShapeError(f"shapes {h_prev.shape}, {h0.shape} do not fit {g.num_nodes} nodes")
    if alpha.shape != (g.num_arcs, 1):
        raise ad.ShapeError(f"alpha must have shape ({g.num_arcs}, 1), got {alpha.shape}")
    weights = ad.scale(alpha, g.arc_norm[:, None])
    messages = ad.gather_rows(h_prev, g.col_indices)
    agg = ad.edge_scatter_sum(weights, messages, g.arc_sources, g.num_nodes)
    return ad.add(ad.scale(h0, epsilon), agg)


def fagcn_forward(x, g: Graph, params: FAGCNParams, mode: str = "eval", rng=None):
    """Return ``(logits, trace)``; ``trace`` is a :class:`LayerTrace` in eval mode, else None."""
    train = _check_mode(mode)
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.shape[1] != params.W1.shape[0]:
        raise ad.ShapeError(f"features have {x.shape[1]} columns, W1 expects {params.W1.shape[0]}")
    h = _dropout(x, params.dropout_rate, train, rng)
    h0 = ad.relu(ad.matmul(h, params.W1))
    h0 = _dropout(h0, params.dropout_rate, train, rng)
    trace = None if train else LayerTrace(hidden=[h0.value.copy()])
    h = h0
    for gate in params.gates:
        alpha = edge_gate(h0 if params.gates_from_h0 else h, g, gate)
        h = fagcn_propagate(h, h0, alpha, g, params.epsilon)
        if trace is not None:
            trace.hidden.append(h.value.copy())
            trace.coefficients.append(EdgeCoefficients(alpha.value[:, 0].copy()))
    return ad.matmul(h, params.W2), trace


@dataclass
class GCNParams:
    weights: list[Tensor]
    biases: list[Tensor]
    dropout_rate: float = 0.5
    trained: bool = False

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def tensors(self) -> dict[str, Tensor]:
        out = {}
        for l, (w, b) in enumerate(zip(self.weights, self.biases), start=1):
            out[f"W{l}"] = w
            out[f"b{l}"] = b
        return out

    def hyperparameters(self) -> dict:
        hidden = self.weights[0].shape[1] if self.num_layers > 1 else None
        return {"model": "gcn", "dropout": self.dropout_rate, "num_layers": self.num_layers,
                "hidden_dim": hidden}


def init_gcn(num_features: int, num_classes: int, hidden_dim: int = 16, num_layers: int = 2,
             dropout: float = 0.5, seed: int = 0) -> GCNParams:
    if num_layers < 1:
        raise ValueError("GCN needs at least one layer")
    r = rngmod.make_rng(seed, rngmod.INIT)
    dims = [num_features] + [hidden_dim] * (num_layers - 1) + [num_classes]
    weights = [Tensor(glorot(r, a, b), requires_grad=True, name=f"W{l + 1}")
               for l, (a, b) in enumerate(zip(dims[:-1], dims[1:]))]
    biases = [Tensor(np.zeros((1, b)), requires_grad=True, name=f"b{l + 1}") for l, b in enumerate(dims[1:])]
    return GCNParams(weights, biases, dropout_rate=dropout)


def gcn_forward(x, g: Graph, params: GCNParams, mode: str = "eval", rng=None) -> Tensor:
    """Stack of ``A_tilde (h W) + b`` layers with relu in between.

    ``A_tilde = (D+I)^{-1/2} (A+I) (D+I)^{-1/2}``; self-loops live here only.
    """
    train = _check_mode(mode)
    h = x if isinstance(x, Tensor) else Tensor(x)
    if h.shape[0] != g.num_nodes:
        raise ad.ShapeError(f"features have {h.shape[0]} rows, graph has {g.num_nodes} nodes")
    filt = gcn_filter(g)
    last = params.num_layers - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = _dropout(h, params.dropout_rate, train, rng)
        h = ad.add_bias(ad.sparse_matmul(filt, ad.matmul(h, w)), b)
        if l < last:
            h = ad.relu(h)
    return h


@dataclass
class MLPParams:
    W1: Tensor
    b1: Tensor
    W2: Tensor
    b2: Tensor
    dropout_rate: float = 0.5
    trained: bool = False

    def tensors(self) -> dict[str, Tensor]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def hyperparameters(self) -> dict:
        return {"model": "mlp", "dropout": self.dropout_rate, "hidden_dim": self.W1.shape[1]}


def init_mlp(num_features: int, num_classes: int, hidden_dim: int = 16, dropout: float = 0.5,
             seed: int = 0) -> MLPParams:
    r = rngmod.make_rng(seed, rngmod.INIT)
    return MLPParams(
        Tensor(glorot(r, num_features, hidden_dim), requires_grad=True, name="W1"),
        Tensor(np.zeros((1, hidden_dim)), requires_grad=True, name="b1"),
        Tensor(glorot(r, hidden_dim, num_classes), requires_grad=True, name="W2"),
        Tensor(np.zeros((1, num_classes)), requires_grad=True, name="b2"),
        dropout_rate=dropout,
    )


def mlp_forward(x, params: MLPParams, mode: str = "eval", rng=None) -> Tensor:
    train = _check_mode(mode)
    h = x if isinstance(x, Tensor) else Tensor(x)
    h = _dropout(h, params.dropout_rate, train, rng)
    h = ad.relu(ad.add_bias(ad.matmul(h, params.W1), params.b1))
    h = _dropout(h, params.dropout_rate, train, rng)
    return ad.add_bias(ad.matmul(h, params.W2), params.b2)


@dataclass
class ProbeParams:
    """Fixed first-order filter followed by a trainable linear map ``w``."""

    w: Tensor
    spec: FilterSpec
    trained: bool = False

    def __post_init__(self):
        if self.spec.kind not in (FilterKind.LOW, FilterKind.HIGH):
            raise ValueError(f"probes use first-order low or high filters, got {self.spec.kind.value}")

    def tensors(self) -> dict[str, Tensor]:
        return {"w": self.w}

    def hyperparameters(self) -> dict:
        return {"model": self.spec.kind.value, "epsilon": self.spec.epsilon}


def init_probe(num_features: int, num_classes: int, kind: str, epsilon: float, seed: int = 0) -> ProbeParams:
    r = rngmod.make_rng(seed, rngmod.INIT)
    return ProbeParams(Tensor(glorot(r, num_features, num_classes), requires_grad=True, name="w"),
                       FilterSpec(FilterKind(kind), epsilon))


def filter_probe_forward(x, g: Graph, params: ProbeParams, filtered: np.ndarray | None = None) -> Tensor:
    """``apply_filter_spatial(g, spec, x) @ w``; pass ``filtered`` to reuse a cached product."""
    xv = x.value if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if xv.shape[1] != params.w.shape[0]:
        raise ad.ShapeError(f"features have {xv.shape[1]} columns, w expects {params.w.shape[0]}")
    fx = apply_filter_spatial(g, params.spec, xv) if filtered is None else filtered
    return ad.matmul(Tensor(fx), params.w)


def predict(logits) -> np.ndarray:
    """Arg-max class per row; ties resolve to the lowest class id."""
    v = logits.value if isinstance(logits, Tensor) else np.asarray(logits)
    return np.argmax(v, axis=1)
