"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the full run takes a
few minutes on one CPU because criteria 6 to 8 train a few hundred models.
"""

import csv
import io
import itertools
import time
from contextlib import redirect_stdout
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from fagcn import autodiff as ad
from fagcn.cli import filter_response_table, main
from fagcn.graph import normalized_laplacian, spmm, sym_norm_adjacency
from fagcn.harness import TrainConfig, coeff_histogram, depth_sweep, sweep_q, train
from fagcn.models import fagcn_forward, fagcn_propagate, init_fagcn
from fagcn.spectral import FilterKind, FilterSpec, apply_filter_spatial, apply_filter_spectral, eigendecompose, signal_distances
from fagcn.synthgen import SynthConfig, generate_synthetic, random_split

from conftest import er_graph, fd_gradient_error

Q_GRID = [round(0.01 * k, 2) for k in range(1, 11)]


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        assert ok, detail
    return emit


def test_criterion_01_filter_response(report):
    start = time.perf_counter()
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(["filter-response", "--kinds", ",".join(k.value for k in FilterKind),
                     "--epsilons", "0,0.2,0.5,1"])
    elapsed = time.perf_counter() - start
    rows = list(csv.DictReader(io.StringIO(buf.getvalue())))
    table = {(r["kind"], float(r["epsilon"]), float(r["lambda"])): float(r["amplitude"]) for r in rows}

    def closed(kind, eps, lam):
        base = {"low": eps + 1 - lam, "high": eps - 1 + lam, "gcn": 1 - lam}[kind.split("_")[0]]
        return base * base if kind.endswith("squared") else base

    worst = max(abs(v - closed(k, e, l)) for (k, e, l), v in table.items())
    amp0 = table[("low_squared", 0.5, 0.0)]
    amp2 = table[("low_squared", 0.5, 2.0)]
    # six-decimal CSV output is exact for these grid points up to print rounding
    ok = (code == 0 and len(rows) == 6 * 4 * 201 and worst <= 5e-7 and amp0 == 2.25 and amp2 == 0.25
          and amp0 > 1 > amp2 and elapsed < 1.0)
    # the in-memory table is checked at machine precision
    exact = filter_response_table(["low_squared"], [0.5])
    lam_amp = dict(zip(exact.column("lambda"), exact.column("amplitude")))
    ok = ok and lam_amp[0.0] == 2.25 and lam_amp[2.0] == 0.25
    mem_worst = max(abs(a - (1.5 - l) ** 2) for l, a in lam_amp.items())
    ok = ok and mem_worst <= 4 * np.finfo(float).eps
    report(1, ok, f"low_squared(0.5)@0={amp0}, @2={amp2}, max csv dev {worst:.1e}, "
                  f"max in-memory dev {mem_worst:.1e}, {elapsed:.3f}s")


def test_criterion_02_spectral_spatial(report):
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 51))
        g = er_graph(rng, n, float(rng.uniform(0.05, 0.5)))
        dec = eigendecompose(normalized_laplacian(g))
        x = rng.normal(size=(n, 3))
        for kind, eps in itertools.product(FilterKind, (0.0, 0.3, 1.0)):
            spec = FilterSpec(kind, eps)
            worst = max(worst, np.abs(apply_filter_spectral(dec, spec, x) - apply_filter_spatial(g, spec, x)).max())
    elapsed = time.perf_counter() - start
    report(2, worst < 1e-8 and elapsed < 30, f"max |spectral - spatial| = {worst:.2e} over 50 graphs, {elapsed:.1f}s")


def test_criterion_03_distance_exactness(report):
    rng = np.random.default_rng(3)
    worst, ordered = 0.0, True
    for _ in range(1000):
        f = int(rng.integers(1, 17))
        h_u, h_v = rng.normal(size=(2, f)) * rng.uniform(0.01, 100)
        eps = float(rng.uniform(0, 1))
        d, dl, dh = signal_distances(h_u, h_v, eps)
        worst = max(worst, abs(dl - abs(1 - eps) * d) / (abs(1 - eps) * d), abs(dh - (1 + eps) * d) / ((1 + eps) * d))
        ordered &= dh >= d >= dl
    report(3, worst <= 1e-10 and ordered, f"max relative error {worst:.2e} over 1000 triples, ordering held={ordered}")


def test_criterion_04_gcn_degeneration(report):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(5, 60))
        g = er_graph(rng, n, float(rng.uniform(0.05, 0.4)))
        h = rng.normal(size=(n, 4))
        out = fagcn_propagate(ad.Tensor(h), ad.Tensor(h), ad.Tensor(np.ones((g.num_arcs, 1))), g, 0.0).value
        worst = max(worst, np.abs(out - spmm(sym_norm_adjacency(g), h)).max())
    report(4, worst <= 1e-12, f"max deviation {worst:.2e} over 20 graphs")


def test_criterion_05_gradient_fidelity(report):
    rng = np.random.default_rng(5)
    start = time.perf_counter()
    errors = []
    for k in range(10):
        g = er_graph(rng, 20, 0.2)
        x = rng.normal(size=(20, 8))
        y = rng.integers(0, 3, size=20)
        mask = rng.random(20) < 0.6
        mask[0] = True
        params = init_fagcn(8, 3, hidden_dim=4, num_layers=2, epsilon=0.3, seed=k)
        for gate in params.gates:
            gate.value[:] = rng.normal(size=gate.shape)
        loss = lambda: ad.softmax_cross_entropy(fagcn_forward(x, g, params)[0], y, mask)
        errors.append(fd_gradient_error(loss, list(params.tensors().values())))
    elapsed = time.perf_counter() - start
    report(5, max(errors) < 1e-4 and elapsed < 120,
           f"max relative gradient error {max(errors):.2e} over 10 instances, {elapsed:.1f}s")


def test_criterion_06_probe_sweep(report):
    start = time.perf_counter()
    table = sweep_q(SynthConfig(), Q_GRID, ["low", "high", "fagcn"], range(10), TrainConfig())
    elapsed = time.perf_counter() - start
    mean = {m: [table.mean(q=q, model=m) for q in Q_GRID] for m in ("low", "high", "fagcn")}
    low, high, fag = (np.array(mean[m]) for m in ("low", "high", "fagcn"))
    pairs = list(itertools.combinations(range(len(Q_GRID)), 2))
    a = all(low[j] <= low[i] + 0.03 for i, j in pairs)
    b = all(high[j] >= high[i] - 0.03 for i, j in pairs)
    c = bool(np.all(fag >= np.maximum(low, high) - 0.05))
    d = low[0] > high[0] and high[-1] > low[-1]
    fmt = lambda v: " ".join(f"{x:.3f}" for x in v)
    detail = (f"(a)={a} (b)={b} (c)={c} (d)={d}, {elapsed:.0f}s\n"
              f"    low   {fmt(low)}\n    high  {fmt(high)}\n    fagcn {fmt(fag)}")
    report(6, a and b and c and d and elapsed < 900, detail)


def test_criterion_07_over_smoothing(report):
    start = time.perf_counter()
    ds = generate_synthetic(SynthConfig(q_inter=0.02, seed=0))
    split = random_split(ds.graph.num_nodes, 0.5, 0, ds.labels)
    table = depth_sweep(ds, split, TrainConfig(), range(1, 9), ("fagcn", "gcn"), range(5))
    elapsed = time.perf_counter() - start
    acc = {(m, d): table.mean(model=m, depth=d) for m in ("fagcn", "gcn") for d in range(1, 9)}
    gcn_drop = acc[("gcn", 2)] - acc[("gcn", 8)]
    fagcn_drop = acc[("fagcn", 2)] - acc[("fagcn", 8)]
    ok = gcn_drop >= 0.05 and fagcn_drop <= 0.03 and elapsed < 1200
    curve = lambda m: " ".join(f"{acc[(m, d)]:.3f}" for d in range(1, 9))
    report(7, ok, f"gcn drop 2->8 = {gcn_drop:.3f}, fagcn drop 2->8 = {fagcn_drop:.3f}, {elapsed:.0f}s\n"
                  f"    gcn   depth 1..8: {curve('gcn')}\n    fagcn depth 1..8: {curve('fagcn')}")


def test_criterion_08_coefficient_signs(report):
    cfg = TrainConfig(num_layers=1)
    hits = {0.01: 0, 0.1: 0}
    means = {0.01: [], 0.1: []}
    for q in hits:
        for seed in range(5):
            ds = generate_synthetic(SynthConfig(q_inter=q, seed=seed))
            split = random_split(ds.graph.num_nodes, 0.5, seed, ds.labels)
            res = train(ds, split, replace(cfg, seed=seed))
            rep = coeff_histogram(res.params, ds)
            means[q].append((rep.mean_intra, rep.mean_inter))
            hits[q] += rep.mean_intra > 0 if q == 0.01 else rep.mean_inter < rep.mean_intra
    fmt = lambda q: " ".join(f"({a:+.3f},{b:+.3f})" for a, b in means[q])
    report(8, hits[0.01] >= 4 and hits[0.1] >= 4,
           f"q=0.01 intra>0 in {hits[0.01]}/5, q=0.10 inter<intra in {hits[0.1]}/5\n"
           f"    (intra, inter) q=0.01: {fmt(0.01)}\n    (intra, inter) q=0.10: {fmt(0.1)}")


def test_criterion_09_scope_note(report):
    # Full-scale benchmark numbers are out of scope; acceptance rests on the
    # other criteria.  The generic bundle loader is exercised in test_data.py.
    report(9, True, "benchmark-scale numbers not reproduced by design; bundle loader covered elsewhere")


def _outputs(directory: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_criterion_10_determinism(report, tmp_path):
    fast = ["--max-epochs", "60", "--seed", "7"]
    commands = {
        "synth-gen": ["synth-gen", "--num-nodes", "60", "--q", "0.03", "--seed", "7"],
        "filter-response": ["filter-response"],
        "train": ["train", "--num-nodes", "60", *fast],
        "sweep-q": ["sweep-q", "--num-nodes", "60", "--q-values", "0.01,0.1", "--seeds", "0,1", *fast],
        "depth-sweep": ["depth-sweep", "--num-nodes", "60", "--depths", "1,2,4", "--seeds", "0,1", *fast],
        "coeff-hist": ["coeff-hist", "--num-nodes", "60", "--q", "0.1", *fast],
    }
    mismatched = []
    for name, argv in commands.items():
        outs = []
        for rep in ("a", "b"):
            d = tmp_path / name / rep
            with redirect_stdout(io.StringIO()):
                assert main(argv + ["--out", str(d)]) == 0, name
            outs.append(_outputs(d))
        if outs[0] != outs[1] or not outs[0]:
            mismatched.append(name)
    report(10, not mismatched, f"{len(commands)} commands re-run byte-identical; mismatches: {mismatched or 'none'}")
