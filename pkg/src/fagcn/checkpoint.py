"""Model checkpoints: a flat little-endian binary plus a JSON sidecar.

Binary layout::

    magic       8 bytes   b"FAGCNCK1"
    count       uint32    number of tensors
    table       count x { name_len uint16, name utf-8, rows uint32, cols uint32 }
    data        float64 values of each tensor, row-major, in table order

The sidecar (same stem, ``.json``) holds the model hyperparameters.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .models import FAGCNParams, GCNParams, MLPParams, ProbeParams
from .spectral import FilterKind, FilterSpec

MAGIC = b"FAGCNCK1"


class CheckpointError(ValueError):
    pass


def write_tensors(tensors: dict[str, np.ndarray], path) -> None:
    parts = [MAGIC, struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        raw = name.encode("utf-8")
        rows, cols = arr.shape
        parts.append(struct.pack("<H", len(raw)) + raw + struct.pack("<II", rows, cols))
    for arr in tensors.values():
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_tensors(path) -> dict[str, np.ndarray]:
    buf = Path(path).read_bytes()
    if buf[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    try:
        (count,) = struct.unpack_from("<I", buf, 8)
        pos = 12
        table = []
        for _ in range(count):
            (ln,) = struct.unpack_from("<H", buf, pos)
            pos += 2
            name = buf[pos:pos + ln].decode("utf-8")
            pos += ln
            rows, cols = struct.unpack_from("<II", buf, pos)
            pos += 8
            table.append((name, rows, cols))
        out = {}
        for name, rows, cols in table:
            nbytes = 8 * rows * cols
            if pos + nbytes > len(buf):
                raise CheckpointError(f"{path}: truncated data for {name}")
            out[name] = np.frombuffer(buf, dtype="<f8", count=rows * cols, offset=pos).reshape(rows, cols).astype(np.float64)
            pos += nbytes
    except struct.error as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from None
    if pos != len(buf):
        raise CheckpointError(f"{path}: trailing bytes after tensor data")
    return out


def save_checkpoint(params, path) -> Path:
    """Write ``path`` (binary) and ``path`` with a ``.json`` suffix; returns the sidecar path."""
    path = Path(path)
    write_tensors({k: t.value for k, t in params.tensors().items()}, path)
    sidecar = path.with_suffix(".json")
    meta = dict(params.hyperparameters(), format=MAGIC.decode(), tensors=list(params.tensors()))
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return sidecar


def load_checkpoint(path):
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    ts = read_tensors(path)
    if list(ts) != meta.get("tensors"):
        raise CheckpointError("sidecar tensor list does not match the binary")

    def t(name):
        return Tensor(ts[name], requires_grad=True, name=name)

    kind = meta["model"]
    if kind == "fagcn":
        gates = [t(f"gate{l}") for l in range(1, meta["num_layers"] + 1)]
        p = FAGCNParams(t("W1"), t("W2"), gates, epsilon=meta["epsilon"], dropout_rate=meta["dropout"],
                        gates_from_h0=meta.get("gates_from_h0", False))
    elif kind == "gcn":
        n = meta["num_layers"]
        p = GCNParams([t(f"W{l}") for l in range(1, n + 1)], [t(f"b{l}") for l in range(1, n + 1)],
                      dropout_rate=meta["dropout"])
    elif kind == "mlp":
        p = MLPParams(t("W1"), t("b1"), t("W2"), t("b2"), dropout_rate=meta["dropout"])
    elif kind in ("low", "high"):
        p = ProbeParams(t("w"), FilterSpec(FilterKind(kind), meta["epsilon"]))
    else:
        raise CheckpointError(f"unknown model kind {kind!r}")
    p.trained = True
    return p
