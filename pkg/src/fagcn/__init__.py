"""Frequency-adaptive graph convolution built on a small numpy autodiff engine.

Main entry points::

    from fagcn import SynthConfig, generate_synthetic, random_split, TrainConfig, train

    ds = generate_synthetic(SynthConfig(q_inter=0.1, seed=0))
    split = random_split(ds.graph.num_nodes, 0.5, 0, ds.labels)
    result = train(ds, split, TrainConfig(model="fagcn"))
"""

from .graph import Graph, build_graph, label_assortativity, normalized_laplacian, sym_norm_adjacency
from .harness import ResultTable, RunResult, TrainConfig, coeff_histogram, depth_sweep, sweep_q, train
from .models import fagcn_forward, init_fagcn
from .spectral import FilterKind, FilterSpec, eigendecompose, filter_response
from .synthgen import SynthConfig, generate_synthetic, random_split

__version__ = "0.1.0"

__all__ = [
    "FilterKind", "FilterSpec", "Graph", "ResultTable", "RunResult", "SynthConfig", "TrainConfig",
    "build_graph", "coeff_histogram", "depth_sweep", "eigendecompose", "fagcn_forward", "filter_response",
    "generate_synthetic", "init_fagcn", "label_assortativity", "normalized_laplacian", "random_split",
    "sweep_q", "sym_norm_adjacency", "train",
]
