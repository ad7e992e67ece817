"""Datasets, splits and their on-disk bundle formats.

Bundle layout (all text, UTF-8):

* graph file: header ``N M`` then ``M`` lines ``i j`` (0-based, whitespace
  separated).  Loading symmetrizes, merges duplicates and drops self-loops.
* features CSV: one row per node, comma-separated reals, no header.
* labels CSV: header ``node,label`` then one row per node.
* split CSV (optional): header ``node,split`` with ``split`` one of
  ``train``, ``val``, ``test`` or ``none``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph, GraphError, build_graph


class BundleError(ValueError):
    """Inconsistent or malformed dataset files."""


@dataclass(frozen=True, eq=False)
class Dataset:
    graph: Graph
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        n = self.graph.num_nodes
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise BundleError(f"features must have {n} rows, got shape {self.features.shape}")
        if self.labels.shape != (n,):
            raise BundleError(f"labels must have {n} entries, got {self.labels.shape[0]}")

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])


@dataclass(frozen=True, eq=False)
class Split:
    train: np.ndarray
    test: np.ndarray
    val: np.ndarray | None = None

    def __post_init__(self):
        masks = [self.train, self.test] + ([self.val] if self.val is not None else [])
        n = self.train.shape[0]
        if any(m.shape != (n,) or m.dtype != bool for m in masks):
            raise ValueError("split masks must be boolean arrays of equal length")
        total = sum(m.astype(np.int64) for m in masks)
        if np.any(total > 1):
            raise ValueError("split masks overlap")
        if not self.train.any():
            raise ValueError("training mask is empty")


def format_graph(g: Graph) -> str:
    e = g.edges()
    lines = [f"{g.num_nodes} {e.shape[0]}"] + [f"{i} {j}" for i, j in e]
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> Graph:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 2:
        raise BundleError("graph file must start with a 'N M' header")
    try:
        n, m = int(rows[0][0]), int(rows[0][1])
        pairs = [(int(a), int(b)) for a, b in rows[1:]]
    except ValueError as exc:
        raise BundleError(f"malformed graph file: {exc}") from None
    if len(pairs) != m:
        raise BundleError(f"header announces {m} edges, file lists {len(pairs)}")
    try:
        return build_graph(pairs, n)
    except GraphError as exc:
        raise BundleError(str(exc)) from None


def save_graph(g: Graph, path) -> None:
    Path(path).write_text(format_graph(g))


def load_graph(path) -> Graph:
    return parse_graph(Path(path).read_text())


def save_features(x: np.ndarray, path) -> None:
    buf = io.StringIO()
    for row in x:
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    Path(path).write_text(buf.getvalue())


def load_features(path) -> np.ndarray:
    rows = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        x = np.array([[float(v) for v in ln.split(",")] for ln in rows], dtype=np.float64)
    except ValueError as exc:
        raise BundleError(f"malformed features file: {exc}") from None
    if x.ndim != 2:
        raise BundleError("feature rows have unequal lengths")
    return x


def _read_node_table(path, column: str) -> list[str]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["node", column]:
            raise BundleError(f"{path}: expected header 'node,{column}'")
        rows = list(reader)
    try:
        nodes = [int(r["node"]) for r in rows]
    except (TypeError, ValueError):
        raise BundleError(f"{path}: node ids must be integers") from None
    if nodes != list(range(len(rows))):
        raise BundleError(f"{path}: node column must list 0..N-1 in order")
    return [r[column] for r in rows]


def save_labels(y: np.ndarray, path) -> None:
    lines = ["node,label"] + [f"{i},{int(c)}" for i, c in enumerate(y)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_labels(path) -> np.ndarray:
    try:
        y = np.array([int(v) for v in _read_node_table(path, "label")], dtype=np.int64)
    except (TypeError, ValueError):
        raise BundleError(f"{path}: labels must be integers") from None
    if y.size and y.min() < 0:
        raise BundleError(f"{path}: labels must be non-negative")
    return y


def save_split(split: Split, path) -> None:
    n = split.train.shape[0]
    tags = np.full(n, "none", dtype=object)
    tags[split.train] = "train"
    tags[split.test] = "test"
    if split.val is not None:
        tags[split.val] = "val"
    lines = ["node,split"] + [f"{i},{t}" for i, t in enumerate(tags)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_split(path) -> Split:
    tags = np.array(_read_node_table(path, "split"))
    bad = set(tags) - {"train", "val", "test", "none"}
    if bad:
        raise BundleError(f"unknown split tags: {sorted(bad)}")
    val = tags == "val"
    return Split(train=tags == "train", test=tags == "test", val=val if val.any() else None)


@dataclass(frozen=True)
class DatasetBundle:
    graph: Path
    features: Path
    labels: Path
    split: Path | None = None

    def load(self) -> tuple[Dataset, Split | None]:
        for p in (self.graph, self.features, self.labels):
            if not Path(p).is_file():
                raise BundleError(f"missing bundle file: {p}")
        g = load_graph(self.graph)
        x = load_features(self.features)
        y = load_labels(self.labels)
        if x.shape[0] != g.num_nodes or y.shape[0] != g.num_nodes:
            raise BundleError(
                f"row counts disagree: graph {g.num_nodes}, features {x.shape[0]}, labels {y.shape[0]}")
        split = None
        if self.split is not None:
            split = load_split(self.split)
            if split.train.shape[0] != g.num_nodes:
                raise BundleError("split file row count disagrees with the graph")
        return Dataset(g, x, y), split


def write_bundle(dataset: Dataset, directory, stem: str = "") -> DatasetBundle:
    d = Path(directory)
    b = DatasetBundle(d / f"{stem}graph.txt", d / f"{stem}features.csv", d / f"{stem}labels.csv")
    save_graph(dataset.graph, b.graph)
    save_features(dataset.features, b.features)
    save_labels(dataset.labels, b.labels)
    return b
