import json
import struct

import numpy as np
import pytest

from fagcn.checkpoint import MAGIC, CheckpointError, load_checkpoint, read_tensors, save_checkpoint, write_tensors
from fagcn.models import fagcn_forward, init_fagcn, init_gcn, init_mlp, init_probe


@pytest.mark.parametrize("make", [
    lambda: init_fagcn(5, 3, hidden_dim=4, num_layers=3, epsilon=0.4, seed=1, gates_from_h0=True),
    lambda: init_gcn(5, 3, hidden_dim=4, num_layers=2, seed=1),
    lambda: init_mlp(5, 3, hidden_dim=4, seed=1),
    lambda: init_probe(5, 3, "high", 0.7, seed=1),
])
def test_round_trip(make, tmp_path):
    params = make()
    save_checkpoint(params, tmp_path / "m.bin")
    back = load_checkpoint(tmp_path / "m.bin")
    assert back.trained
    assert back.hyperparameters() == params.hyperparameters()
    for name, t in params.tensors().items():
        assert back.tensors()[name].value.tobytes() == t.value.tobytes()


def test_restored_fagcn_reproduces_logits(tmp_path, rng):
    from conftest import er_graph
    g = er_graph(rng, 10, 0.3)
    x = rng.normal(size=(10, 5))
    params = init_fagcn(5, 2, seed=3)
    save_checkpoint(params, tmp_path / "f.bin")
    back = load_checkpoint(tmp_path / "f.bin")
    assert np.array_equal(fagcn_forward(x, g, params)[0].value, fagcn_forward(x, g, back)[0].value)


def test_binary_layout(tmp_path):
    write_tensors({"ab": np.array([[1.0, 2.0]])}, tmp_path / "t.bin")
    raw = (tmp_path / "t.bin").read_bytes()
    expected = MAGIC + struct.pack("<I", 1) + struct.pack("<H", 2) + b"ab" + struct.pack("<II", 1, 2)
    expected += struct.pack("<2d", 1.0, 2.0)
    assert raw == expected


def test_sidecar_contents(tmp_path):
    side = save_checkpoint(init_fagcn(3, 2, seed=0), tmp_path / "m.bin")
    meta = json.loads(side.read_text())
    assert meta["model"] == "fagcn" and meta["format"] == "FAGCNCK1"
    assert meta["tensors"] == ["W1", "W2", "gate1", "gate2"]


def test_bad_magic(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"NOTACKPT" + b"\0" * 8)
    with pytest.raises(CheckpointError, match="not a checkpoint"):
        read_tensors(tmp_path / "x.bin")


def test_truncated_data(tmp_path):
    write_tensors({"w": np.ones((3, 3))}, tmp_path / "t.bin")
    raw = (tmp_path / "t.bin").read_bytes()
    (tmp_path / "t.bin").write_bytes(raw[:-8])
    with pytest.raises(CheckpointError, match="truncated"):
        read_tensors(tmp_path / "t.bin")


def test_truncated_header(tmp_path):
    (tmp_path / "t.bin").write_bytes(MAGIC + struct.pack("<I", 2) + b"\x05")
    with pytest.raises(CheckpointError):
        read_tensors(tmp_path / "t.bin")


def test_trailing_bytes(tmp_path):
    write_tensors({"w": np.ones((1, 1))}, tmp_path / "t.bin")
    with open(tmp_path / "t.bin", "ab") as fh:
        fh.write(b"\0")
    with pytest.raises(CheckpointError, match="trailing"):
        read_tensors(tmp_path / "t.bin")


def test_sidecar_mismatch(tmp_path):
    side = save_checkpoint(init_mlp(3, 2), tmp_path / "m.bin")
    meta = json.loads(side.read_text())
    meta["tensors"] = ["W1"]
    side.write_text(json.dumps(meta))
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "m.bin")
