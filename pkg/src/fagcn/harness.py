"""Full-batch training with early stopping, and the experiment drivers."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from . import rng as rngmod
from .autodiff import Tape, Tensor
from .data import Dataset, Split
from .graph import Graph
from .models import (
    FAGCNParams,
    LayerTrace,
    ProbeParams,
    fagcn_forward,
    filter_probe_forward,
    gcn_forward,
    init_fagcn,
    init_gcn,
    init_mlp,
    init_probe,
    mlp_forward,
    predict,
)
from .optim import AdamState, adam_step
from .spectral import apply_filter_spatial
from .synthgen import SynthConfig, generate_synthetic, random_split

log = logging.getLogger(__name__)

MODEL_KINDS = ("fagcn", "gcn", "mlp", "low", "high")


class TrainingDiverged(RuntimeError):
    pass


class UntrainedModelError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    model: str = "fagcn"
    lr: float = 0.01
    dropout: float = 0.5
    weight_decay: float = 5e-4
    num_layers: int = 2
    epsilon: float = 0.3
    probe_epsilon: float = 1.0
    hidden_dim: int = 16
    max_epochs: int = 500
    patience: int = 100
    loss_patience: int = 50
    seed: int = 0
    gates_from_h0: bool = False

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ValueError(f"unknown model {self.model!r}; choose from {', '.join(MODEL_KINDS)}")
        if not self.lr >= 0:
            raise ValueError(f"lr must be non-negative, got {self.lr}")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be positive")
        if not 0 < self.patience <= self.max_epochs:
            raise ValueError(f"patience must lie in [1, max_epochs], got {self.patience}")
        if not 0 < self.loss_patience <= self.max_epochs:
            raise ValueError(f"loss_patience must lie in [1, max_epochs], got {self.loss_patience}")
        for name in ("epsilon", "probe_epsilon"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.num_layers < 1 or self.hidden_dim < 1:
            raise ValueError("num_layers and hidden_dim must be positive")


@dataclass
class RunResult:
    test_accuracy: float
    train_accuracy: float
    best_validation_accuracy: float | None
    epoch_of_best: int
    epochs_run: int
    loss_history: list[float] = field(default_factory=list)
    accuracy_history: list[float] = field(default_factory=list)
    trace: LayerTrace | None = field(default=None, repr=False)
    params: object = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "test_acc": self.test_accuracy,
            "train_acc": self.train_accuracy,
            "best_val_acc": self.best_validation_accuracy,
            "epoch_of_best": self.epoch_of_best,
            "epochs_run": self.epochs_run,
            "loss_history": self.loss_history,
            "accuracy_history": self.accuracy_history,
        }


def evaluate(logits, labels, mask) -> float:
    """Fraction of masked nodes whose arg-max logit equals the label."""
    sel = np.asarray(mask, dtype=bool)
    if not sel.any():
        raise ValueError("evaluation mask selects no nodes")
    pred = predict(logits)
    return float(np.mean(pred[sel] == np.asarray(labels)[sel]))


def build_model(cfg: TrainConfig, num_features: int, num_classes: int):
    if cfg.model == "fagcn":
        return init_fagcn(num_features, num_classes, cfg.hidden_dim, cfg.num_layers, cfg.epsilon,
                          cfg.dropout, cfg.seed, cfg.gates_from_h0)
    if cfg.model == "gcn":
        return init_gcn(num_features, num_classes, cfg.hidden_dim, cfg.num_layers, cfg.dropout, cfg.seed)
    if cfg.model == "mlp":
        return init_mlp(num_features, num_classes, cfg.hidden_dim, cfg.dropout, cfg.seed)
    return init_probe(num_features, num_classes, cfg.model, cfg.probe_epsilon, cfg.seed)


class _Runner:
    """Binds a parameter set to one dataset so every epoch calls ``forward(train)``."""

    def __init__(self, params, dataset: Dataset):
        self.params = params
        self.graph = dataset.graph
        self.x = Tensor(dataset.features)
        self.filtered = None
        if isinstance(params, ProbeParams):
            self.filtered = apply_filter_spatial(self.graph, params.spec, dataset.features)

    def forward(self, train: bool, rng=None):
        mode = "train" if train else "eval"
        p = self.params
        if isinstance(p, FAGCNParams):
            return fagcn_forward(self.x, self.graph, p, mode, rng)
        if isinstance(p, ProbeParams):
            return filter_probe_forward(self.x, self.graph, p, self.filtered), None
        if hasattr(p, "biases"):
            return gcn_forward(self.x, self.graph, p, mode, rng), None
        return mlp_forward(self.x, p, mode, rng), None


def _loss_value(logits: Tensor, labels, mask) -> float:
    return ad.softmax_cross_entropy(logits, labels, mask).item()


def train(dataset: Dataset, split: Split, cfg: TrainConfig, params=None) -> RunResult:
    """Train with Adam, keep the best epoch, and score the test mask there.

    With a validation mask the best epoch maximizes validation accuracy (ties
    broken by lower validation loss) and training stops after ``patience``
    epochs without improvement.  Without one, the eval-mode training loss is
    the criterion and ``loss_patience`` applies.  Parameters of the best epoch
    are restored before the test evaluation.
    """
    y = dataset.labels
    params = build_model(cfg, dataset.num_features, dataset.num_classes) if params is None else params
    tensors = list(params.tensors().values())
    runner = _Runner(params, dataset)
    state = AdamState(lr=cfg.lr, weight_decay=cfg.weight_decay)
    drop_rng = rngmod.make_rng(cfg.seed, rngmod.DROPOUT)
    has_val = split.val is not None and split.val.any()
    patience = cfg.patience if has_val else cfg.loss_patience

    best_score, best_epoch, snapshot = None, 0, None
    losses, accs = [], []
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        with Tape() as tape:
            logits, _ = runner.forward(True, drop_rng)
            loss = ad.softmax_cross_entropy(logits, y, split.train)
        lv = loss.item()
        if not math.isfinite(lv):
            raise TrainingDiverged(f"{cfg.model}: non-finite training loss {lv} at epoch {epoch} (lr={cfg.lr})")
        ad.backward(tape, loss)
        if not all(np.isfinite(t.grad).all() for t in tensors):
            raise TrainingDiverged(f"{cfg.model}: non-finite gradient at epoch {epoch} (lr={cfg.lr})")
        adam_step(tensors, state)
        losses.append(lv)

        eval_logits, _ = runner.forward(False)
        if has_val:
            acc = evaluate(eval_logits, y, split.val)
            score = (acc, -_loss_value(eval_logits, y, split.val))
        else:
            acc = evaluate(eval_logits, y, split.train)
            score = (-_loss_value(eval_logits, y, split.train),)
        accs.append(acc)
        if not all(math.isfinite(s) for s in score):
            raise TrainingDiverged(f"{cfg.model}: non-finite evaluation loss at epoch {epoch}")
        if best_score is None or score > best_score:
            best_score, best_epoch = score, epoch
            snapshot = [t.value.copy() for t in tensors]
        elif epoch - best_epoch >= patience:
            break

    for t, v in zip(tensors, snapshot):
        t.value = v
        t.zero_grad()
    params.trained = True
    logits, trace = runner.forward(False)
    return RunResult(
        test_accuracy=evaluate(logits, y, split.test),
        train_accuracy=evaluate(logits, y, split.train),
        best_validation_accuracy=evaluate(logits, y, split.val) if has_val else None,
        epoch_of_best=best_epoch,
        epochs_run=epoch,
        loss_history=losses,
        accuracy_history=accs,
        trace=trace,
        params=params,
    )


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{v:.6f}"
    return str(v)


@dataclass
class ResultTable:
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values, table has {len(self.columns)} columns")
        self.rows.append(tuple(values))

    def column(self, name: str) -> list:
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    def summary(self, keys: Sequence[str], value: str = "test_acc") -> list[dict]:
        """Mean and population std of ``value`` grouped by ``keys`` (first-seen order)."""
        idx = [self.columns.index(k) for k in keys]
        vi = self.columns.index(value)
        groups: dict[tuple, list[float]] = {}
        for r in self.rows:
            groups.setdefault(tuple(r[i] for i in idx), []).append(float(r[vi]))
        out = []
        for key, vals in groups.items():
            rec = dict(zip(keys, key))
            rec.update(mean=float(np.mean(vals)), std=float(np.std(vals)), n=len(vals))
            out.append(rec)
        return out

    def mean(self, value: str = "test_acc", **where) -> float:
        vi = self.columns.index(value)
        sel = [r for r in self.rows if all(r[self.columns.index(k)] == v for k, v in where.items())]
        if not sel:
            raise KeyError(f"no rows match {where}")
        return float(np.mean([r[vi] for r in sel]))


def sweep_q(base: SynthConfig, q_values: Iterable[float], models: Sequence[str], seeds: Sequence[int],
            cfg: TrainConfig | None = None, train_fraction: float = 0.5) -> ResultTable:
    """Accuracy of each model on synthetic networks over a grid of inter-class probabilities.

    For every ``(q, seed)`` one network and one stratified split are drawn
    from ``seed``; every model is trained on that same pair.
    """
    cfg = cfg or TrainConfig()
    table = ResultTable(("q", "model", "seed", "test_acc"))
    for q in q_values:
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"q must be a probability, got {q}")
        for seed in seeds:
            ds = generate_synthetic(replace(base, q_inter=float(q), seed=int(seed)))
            split = random_split(ds.graph.num_nodes, train_fraction, int(seed), ds.labels)
            for m in models:
                res = train(ds, split, replace(cfg, model=m, seed=int(seed)))
                table.add(float(q), m, int(seed), res.test_accuracy)
                log.info("q=%.3f seed=%d %s test_acc=%.4f", q, seed, m, res.test_accuracy)
    return table


def depth_sweep(dataset: Dataset, split: Split, cfg: TrainConfig, depths: Iterable[int],
                models: Sequence[str] = ("fagcn", "gcn"), seeds: Sequence[int] = (0,)) -> ResultTable:
    """Test accuracy per depth and model; seeds vary initialization and dropout."""
    table = ResultTable(("depth", "model", "seed", "test_acc"))
    for depth in depths:
        for m in models:
            for seed in seeds:
                res = train(dataset, split, replace(cfg, model=m, num_layers=int(depth), seed=int(seed)))
                table.add(int(depth), m, int(seed), res.test_accuracy)
                log.info("depth=%d %s seed=%d test_acc=%.4f", depth, m, seed, res.test_accuracy)
    return table


@dataclass
class CoefficientReport:
    table: ResultTable
    mean_intra: float
    mean_inter: float
    num_intra: int
    num_inter: int

    def summary(self) -> dict:
        return {"mean_alpha_intra": self.mean_intra, "mean_alpha_inter": self.mean_inter,
                "intra_arcs": self.num_intra, "inter_arcs": self.num_inter}


def coeff_histogram(params: FAGCNParams, dataset: Dataset) -> CoefficientReport:
    """Last-layer gate value of every arc, tagged intra- or inter-class."""
    if not isinstance(params, FAGCNParams):
        raise TypeError("edge coefficients exist only for FAGCN models")
    if not params.trained:
        raise UntrainedModelError("coefficient analysis needs a trained model")
    g: Graph = dataset.graph
    _, trace = fagcn_forward(dataset.features, g, params, "eval")
    alpha = trace.coefficients[-1].alpha
    src, dst = g.arc_sources, g.col_indices
    intra = dataset.labels[src] == dataset.labels[dst]
    layer = params.num_layers
    table = ResultTable(("src", "dst", "alpha", "intra", "layer"))
    for s, d, a, i in zip(src, dst, alpha, intra):
        table.add(int(s), int(d), float(a), bool(i), layer)

    def mean(mask):
        return float(alpha[mask].mean()) if mask.any() else float("nan")

    return CoefficientReport(table, mean(intra), mean(~intra), int(intra.sum()), int((~intra).sum()))


def config_dict(cfg) -> dict:
    return asdict(cfg)


def config_from_dict(cls, data: dict):
    """Build a frozen config dataclass, rejecting unknown keys."""
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {', '.join(unknown)}")
    return cls(**data)
