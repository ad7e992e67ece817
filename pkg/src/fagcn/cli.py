"""Command-line entry point: ``fagcn <command> [options]``.

Every command accepts ``--config FILE`` (JSON), ``--seed``, ``--out DIR`` and
``--force``.  Values from flags override the config file.  Config files are
objects with optional sections ``synth`` (generator settings), ``train``
(training settings) and ``dataset`` (bundle paths) plus command-specific
top-level keys; unknown keys are rejected.

Exit status: 0 on success, 1 for usage/config errors, 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness
from .checkpoint import load_checkpoint, save_checkpoint
from .data import BundleError, DatasetBundle, load_graph, load_labels, write_bundle
from .graph import GraphError, label_assortativity
from .harness import TrainConfig, config_from_dict
from .models import FAGCNParams
from .spectral import FilterKind, FilterSpec, filter_response
from .synthgen import SynthConfig, generate_synthetic, random_split

log = logging.getLogger("fagcn")

TOP_LEVEL_KEYS = {
    "synth", "train", "dataset", "q_values", "models", "seeds", "num_seeds", "depths",
    "kinds", "epsilons", "step", "train_fraction", "checkpoint", "seed",
}
DATASET_KEYS = {"graph", "features", "labels", "split"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _names(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment file")
    common.add_argument("--seed", type=_u64)
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")
    common.add_argument("-v", "--verbose", action="store_true")

    synth = _Parser(add_help=False)
    synth.add_argument("--num-nodes", type=int, dest="num_nodes")
    synth.add_argument("--feature-dim", type=int, dest="feature_dim")
    synth.add_argument("--mu", type=float)
    synth.add_argument("--sigma", type=float)
    synth.add_argument("--p", type=float, dest="p_intra", help="intra-class edge probability")
    synth.add_argument("--q", type=float, dest="q_inter", help="inter-class edge probability")

    bundle = _Parser(add_help=False)
    bundle.add_argument("--graph", type=Path)
    bundle.add_argument("--features", type=Path)
    bundle.add_argument("--labels", type=Path)
    bundle.add_argument("--split", type=Path)

    trainp = _Parser(add_help=False)
    trainp.add_argument("--model", choices=harness.MODEL_KINDS)
    trainp.add_argument("--epsilon", type=float)
    trainp.add_argument("--probe-epsilon", type=float, dest="probe_epsilon")
    trainp.add_argument("--layers", type=int, dest="num_layers")
    trainp.add_argument("--hidden", type=int, dest="hidden_dim")
    trainp.add_argument("--lr", type=float)
    trainp.add_argument("--dropout", type=float)
    trainp.add_argument("--weight-decay", type=float, dest="weight_decay")
    trainp.add_argument("--max-epochs", type=int, dest="max_epochs")
    trainp.add_argument("--patience", type=int, help="epochs without validation gain before stopping")
    trainp.add_argument("--loss-patience", type=int, dest="loss_patience",
                        help="epochs without training-loss gain before stopping (no validation split)")
    trainp.add_argument("--train-fraction", type=float, dest="train_fraction")

    p = _Parser(prog="fagcn", description="Frequency-adaptive graph convolution experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("synth-gen", parents=[common, synth], help="write a synthetic two-class bundle")
    fr = sub.add_parser("filter-response", parents=[common], help="tabulate filter kernels on [0, 2]")
    fr.add_argument("--kinds", type=_names)
    fr.add_argument("--epsilons", type=_floats)
    fr.add_argument("--step", type=float)
    sub.add_parser("train", parents=[common, synth, bundle, trainp], help="train one model")
    sq = sub.add_parser("sweep-q", parents=[common, synth, trainp], help="accuracy versus inter-class probability")
    sq.add_argument("--q-values", type=_floats, dest="q_values")
    sq.add_argument("--models", type=_names)
    sq.add_argument("--seeds", type=_ints)
    ds = sub.add_parser("depth-sweep", parents=[common, synth, bundle, trainp], help="accuracy versus depth")
    ds.add_argument("--depths", type=_ints)
    ds.add_argument("--models", type=_names)
    ds.add_argument("--seeds", type=_ints)
    ch = sub.add_parser("coeff-hist", parents=[common, synth, bundle, trainp], help="last-layer edge coefficients")
    ch.add_argument("--checkpoint", type=Path)
    sub.add_parser("assortativity", parents=[common, bundle], help="label assortativity of a bundle")
    return p


# --- config handling ------------------------------------------------------

def load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    unknown = sorted(set(cfg) - TOP_LEVEL_KEYS)
    if unknown:
        raise UsageError(f"{path}: unknown config keys: {', '.join(unknown)}")
    for section in ("synth", "train", "dataset"):
        if section in cfg and not isinstance(cfg[section], dict):
            raise UsageError(f"{path}: '{section}' must be an object")
    bad = sorted(set(cfg.get("dataset", {})) - DATASET_KEYS)
    if bad:
        raise UsageError(f"{path}: unknown dataset keys: {', '.join(bad)}")
    return cfg


def _flag_values(args, names) -> dict:
    return {k: getattr(args, k) for k in names if getattr(args, k, None) is not None}


_SYNTH_FLAGS = ("num_nodes", "feature_dim", "mu", "sigma", "p_intra", "q_inter")
_TRAIN_FLAGS = ("model", "epsilon", "probe_epsilon", "num_layers", "hidden_dim", "lr", "dropout",
                "weight_decay", "max_epochs", "patience", "loss_patience")


def _seed(args, cfg) -> int:
    if args.seed is not None:
        return args.seed
    return int(cfg.get("seed", 0))


def synth_config(args, cfg, **defaults) -> SynthConfig:
    data = dict(defaults)
    data.update(cfg.get("synth", {}))
    data.update(_flag_values(args, _SYNTH_FLAGS))
    data["seed"] = _seed(args, cfg) if (args.seed is not None or "seed" not in data) else data["seed"]
    try:
        return config_from_dict(SynthConfig, data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"synth config: {exc}") from None


def train_config(args, cfg, **defaults) -> TrainConfig:
    data = dict(defaults)
    data.update(cfg.get("train", {}))
    data.update(_flag_values(args, _TRAIN_FLAGS))
    data["seed"] = _seed(args, cfg) if (args.seed is not None or "seed" not in data) else data["seed"]
    # unset patience values follow a shortened epoch budget instead of failing validation
    if "max_epochs" in data:
        for name in ("patience", "loss_patience"):
            if name not in data and isinstance(data["max_epochs"], int):
                data[name] = min(getattr(TrainConfig, name), data["max_epochs"])
    try:
        return config_from_dict(TrainConfig, data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"train config: {exc}") from None


def _pick(args, cfg, name, default=None):
    v = getattr(args, name, None)
    return v if v is not None else cfg.get(name, default)


def _bundle(args, cfg, required=("graph", "features", "labels")) -> DatasetBundle | None:
    d = dict(cfg.get("dataset", {}))
    d.update(_flag_values(args, DATASET_KEYS))
    if not d:
        return None
    missing = [k for k in required if k not in d]
    if missing:
        raise UsageError(f"dataset bundle is missing: {', '.join(missing)}")
    return DatasetBundle(Path(d["graph"]), Path(d.get("features", "")), Path(d["labels"]),
                         Path(d["split"]) if d.get("split") else None)


def _dataset_and_split(args, cfg, **synth_defaults):
    b = _bundle(args, cfg)
    frac = float(_pick(args, cfg, "train_fraction", 0.5))
    if b is not None:
        ds, split = b.load()
    else:
        ds, split = generate_synthetic(synth_config(args, cfg, **synth_defaults)), None
    if split is None:
        split = random_split(ds.graph.num_nodes, frac, _seed(args, cfg), ds.labels)
    return ds, split


def _seeds(args, cfg, default_count: int) -> list[int]:
    s = _pick(args, cfg, "seeds")
    if s is not None:
        return [int(v) for v in s]
    base = _seed(args, cfg)
    return list(range(base, base + int(cfg.get("num_seeds", default_count))))


def _prepare_out(args, names: list[str]) -> Path:
    if args.out is None:
        raise UsageError("--out is required for this command")
    out = args.out
    if out.exists() and not out.is_dir():
        raise UsageError(f"{out} exists and is not a directory")
    clash = [n for n in names if (out / n).exists()]
    if clash and not args.force:
        raise UsageError(f"{out} already holds {', '.join(clash)}; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# --- commands ---------------------------------------------------------------

# Assortative default for the depth sweep: with q=0.05 the two classes are
# linked as often as not, and smoothing would not be the interesting effect.
DEPTH_SWEEP_Q = 0.02
# The coefficient study defaults to one layer, whose gates read relu(x W1)
# directly; deeper stacks gate on signed mixtures that blur the class pattern.
COEFF_HIST_LAYERS = 1


def cmd_synth_gen(args, cfg) -> int:
    sc = synth_config(args, cfg)
    out = _prepare_out(args, ["graph.txt", "features.csv", "labels.csv"])
    ds = generate_synthetic(sc)
    write_bundle(ds, out)
    r = label_assortativity(ds.graph, ds.labels) if ds.graph.num_edges else float("nan")
    print(f"nodes={ds.graph.num_nodes} edges={ds.graph.num_edges} assortativity={r:.6f}")
    return 0


def filter_response_table(kinds, epsilons, step: float = 0.01) -> harness.ResultTable:
    """Rows ``(kind, epsilon, lambda, amplitude)`` on the grid ``0, step, ..., 2``."""
    if not step > 0:
        raise UsageError("step must be positive")
    count = int(round(2.0 / step))
    if not np.isclose(count * step, 2.0):
        raise UsageError("step must divide 2 evenly")
    lams = np.round(np.arange(count + 1) * step, 12)
    table = harness.ResultTable(("kind", "epsilon", "lambda", "amplitude"))
    for kind in kinds:
        for eps in epsilons:
            spec = FilterSpec(FilterKind(kind), eps)
            for lam, amp in zip(lams, filter_response(spec, lams)):
                table.add(kind, float(eps), float(lam), float(amp))
    return table


def cmd_filter_response(args, cfg) -> int:
    kinds = _pick(args, cfg, "kinds", [k.value for k in FilterKind])
    eps = _pick(args, cfg, "epsilons", [0.2, 0.5])
    try:
        table = filter_response_table(kinds, eps, float(_pick(args, cfg, "step", 0.01)))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.out is None:
        sys.stdout.write(table.to_csv())
    else:
        out = _prepare_out(args, ["filter_response.csv"])
        table.write_csv(out / "filter_response.csv")
    return 0


def cmd_train(args, cfg) -> int:
    tc = train_config(args, cfg)
    out = _prepare_out(args, ["result.json", "model.bin", "model.json"])
    ds, split = _dataset_and_split(args, cfg)
    res = harness.train(ds, split, tc)
    payload = dict(res.to_dict(), config=harness.config_dict(tc))
    _write_json(out / "result.json", payload)
    save_checkpoint(res.params, out / "model.bin")
    print(f"{tc.model}: test_acc={res.test_accuracy:.6f} best_epoch={res.epoch_of_best}")
    return 0


def _write_summary(table: harness.ResultTable, key: str, path: Path) -> None:
    s = harness.ResultTable((key, "model", "mean_test_acc", "std_test_acc", "runs"))
    for rec in table.summary([key, "model"]):
        s.add(rec[key], rec["model"], rec["mean"], rec["std"], rec["n"])
    s.write_csv(path)


def cmd_sweep_q(args, cfg) -> int:
    base = synth_config(args, cfg)
    tc = train_config(args, cfg)
    qs = _pick(args, cfg, "q_values", [round(0.01 * k, 2) for k in range(1, 11)])
    models = _pick(args, cfg, "models", ["low", "high", "fagcn"])
    seeds = _seeds(args, cfg, 10)
    out = _prepare_out(args, ["sweep.csv", "sweep_summary.csv"])
    table = harness.sweep_q(base, qs, models, seeds, tc, float(_pick(args, cfg, "train_fraction", 0.5)))
    table.write_csv(out / "sweep.csv")
    _write_summary(table, "q", out / "sweep_summary.csv")
    for rec in table.summary(["q", "model"]):
        print(f"q={rec['q']:.2f} {rec['model']}: {rec['mean']:.4f} +/- {rec['std']:.4f}")
    return 0


def cmd_depth_sweep(args, cfg) -> int:
    tc = train_config(args, cfg)
    depths = _pick(args, cfg, "depths", list(range(1, 9)))
    models = _pick(args, cfg, "models", ["fagcn", "gcn"])
    seeds = _seeds(args, cfg, 5)
    out = _prepare_out(args, ["depth.csv", "depth_summary.csv"])
    ds, split = _dataset_and_split(args, cfg, q_inter=DEPTH_SWEEP_Q)
    table = harness.depth_sweep(ds, split, tc, depths, models, seeds)
    table.write_csv(out / "depth.csv")
    _write_summary(table, "depth", out / "depth_summary.csv")
    for rec in table.summary(["depth", "model"]):
        print(f"depth={rec['depth']} {rec['model']}: {rec['mean']:.4f} +/- {rec['std']:.4f}")
    return 0


def cmd_coeff_hist(args, cfg) -> int:
    out = _prepare_out(args, ["coeff.csv", "coeff_summary.json"])
    ds, split = _dataset_and_split(args, cfg)
    ckpt = _pick(args, cfg, "checkpoint")
    if ckpt is not None:
        params = load_checkpoint(Path(ckpt))
        if not isinstance(params, FAGCNParams):
            raise ValueError(f"{ckpt} holds a {params.hyperparameters()['model']} model; coefficients need fagcn")
    else:
        tc = train_config(args, cfg, model="fagcn", num_layers=COEFF_HIST_LAYERS)
        if tc.model != "fagcn":
            raise UsageError("coeff-hist trains a fagcn model")
        params = harness.train(ds, split, tc).params
    report = harness.coeff_histogram(params, ds)
    report.table.write_csv(out / "coeff.csv")
    _write_json(out / "coeff_summary.json", report.summary())
    print(f"mean alpha intra={report.mean_intra:.6f} inter={report.mean_inter:.6f}")
    return 0


def cmd_assortativity(args, cfg) -> int:
    b = _bundle(args, cfg, required=("graph", "labels"))
    if b is None:
        raise UsageError("assortativity needs --graph and --labels")
    g = load_graph(b.graph)
    y = load_labels(b.labels)
    if y.shape[0] != g.num_nodes:
        raise BundleError(f"labels list {y.shape[0]} nodes, graph has {g.num_nodes}")
    print(f"{label_assortativity(g, y):.6f}")
    return 0


COMMANDS = {
    "synth-gen": cmd_synth_gen,
    "filter-response": cmd_filter_response,
    "train": cmd_train,
    "sweep-q": cmd_sweep_q,
    "depth-sweep": cmd_depth_sweep,
    "coeff-hist": cmd_coeff_hist,
    "assortativity": cmd_assortativity,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"fagcn: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"fagcn: error: {exc}", file=sys.stderr)
        return 1
    except (BundleError, GraphError, harness.TrainingDiverged, harness.UntrainedModelError,
            OSError, ValueError) as exc:
        print(f"fagcn: {args.command} failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
