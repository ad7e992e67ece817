"""Two-class stochastic block model networks with Gaussian node features."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng as rngmod
from .data import Dataset, Split
from .graph import build_graph


@dataclass(frozen=True)
class SynthConfig:
    num_nodes: int = 200
    num_classes: int = 2
    feature_dim: int = 20
    mu: float = 0.5
    sigma: float = 1.0
    p_intra: float = 0.05
    q_inter: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.num_classes != 2:
            raise ValueError("only two classes are supported")
        if self.num_nodes < 2 or self.num_nodes % 2:
            raise ValueError(f"num_nodes must be a positive even count, got {self.num_nodes}")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be positive")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        for name in ("p_intra", "q_inter"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability, got {v}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class SynthDataset(Dataset):
    config: SynthConfig = field(default_factory=SynthConfig)


def generate_synthetic(cfg: SynthConfig) -> SynthDataset:
    """Sample a labelled network with node features, fully determined by ``cfg.seed``.

    Nodes ``0 .. n/2 - 1`` form class 0 (features ~ N(+mu, sigma^2)), the rest
    class 1 (N(-mu, sigma^2)).  Every unordered pair ``i < j`` is visited in
    row-major order and linked with probability ``p_intra`` inside a class and
    ``q_inter`` across classes.
    """
    n = cfg.num_nodes
    labels = np.repeat(np.arange(2), n // 2)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], cfg.p_intra, cfg.q_inter)
    draws = rngmod.uniform(rngmod.make_rng(cfg.seed, rngmod.GRAPH), iu.shape[0])
    keep = draws < prob
    graph = build_graph(np.stack([iu[keep], ju[keep]], axis=1), n)

    means = np.where(labels == 0, cfg.mu, -cfg.mu)[:, None]
    noise = rngmod.normal(rngmod.make_rng(cfg.seed, rngmod.FEATURES), (n, cfg.feature_dim))
    features = means + cfg.sigma * noise
    features.flags.writeable = False
    labels.flags.writeable = False
    return SynthDataset(graph=graph, features=features, labels=labels, config=cfg)


def random_split(n: int, train_fraction: float, seed: int, labels=None) -> Split:
    """Stratified train/test masks.

    The train total is ``round(train_fraction * n)``.  Each class first gets
    ``floor(train_fraction * n_c)`` nodes; the remaining slots go to classes
    with the largest fractional remainders (lower class id on ties).  Members
    are chosen by a seeded shuffle within each class.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    y = np.zeros(n, dtype=np.int64) if labels is None else np.asarray(labels)
    if y.shape != (n,):
        raise ValueError(f"labels must have length {n}")
    classes = np.unique(y)
    members = [np.flatnonzero(y == c) for c in classes]
    quota = np.array([train_fraction * m.shape[0] for m in members])
    take = np.floor(quota).astype(np.int64)
    total = int(round(train_fraction * n))
    remainder = quota - take
    for k in sorted(range(len(classes)), key=lambda k: (-remainder[k], k)):
        if take.sum() >= total:
            break
        if take[k] < members[k].shape[0]:
            take[k] += 1

    rng = rngmod.make_rng(seed, rngmod.SPLIT)
    train = np.zeros(n, dtype=bool)
    for m, t in zip(members, take):
        order = np.argsort(rngmod.uniform(rng, m.shape[0]), kind="stable")
        train[m[order[:t]]] = True
    return Split(train=train, test=~train)
