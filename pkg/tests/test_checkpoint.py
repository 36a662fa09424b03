"""Checkpoint container tests: roundtrip fidelity, version/magic handling
and reconstructability of the model from the file alone."""

import numpy as np
import pytest

from opnet.basenet import BaseNetConfig
from opnet.checkpoint import (
    Checkpoint,
    CheckpointError,
    OptimizerState,
    load_checkpoint,
    save_checkpoint,
)
from opnet.hypernet import init_hyperparams
from opnet.operators import build_operator_specs


def make_checkpoint(with_opt=True, channels=4, m=1):
    cfg = BaseNetConfig.standard(channels=channels)
    hp = init_hyperparams(cfg, m=m, seed=3, precision="single")
    opt = None
    if with_opt:
        opt = OptimizerState(lr=1e-3, t=7)
        opt.m_a = [np.full_like(a, 0.25) for a in hp.a]
        opt.v_a = [np.full_like(a, 0.5) for a in hp.a]
        opt.m_b = [np.full_like(b, -0.25) for b in hp.b]
        opt.v_b = [np.full_like(b, 0.125) for b in hp.b]
    names = ["gaussian"] if m == 1 else ["gaussian", "denoise"]
    return Checkpoint(
        basenet={"channels": channels},
        operators=build_operator_specs(names),
        hp=hp,
        optimizer=opt,
        iteration=42,
        train_meta={"seed": 3},
    )


class TestRoundtrip:
    def test_arrays_bit_identical(self, tmp_path):
        ckpt = make_checkpoint()
        p = tmp_path / "m.ckpt"
        save_checkpoint(ckpt, p)
        back = load_checkpoint(p)
        for a1, a2 in zip(ckpt.hp.a, back.hp.a):
            np.testing.assert_array_equal(a1, a2)
        for b1, b2 in zip(ckpt.hp.b, back.hp.b):
            np.testing.assert_array_equal(b1, b2)
        assert back.iteration == 42
        assert back.train_meta["seed"] == 3

    def test_optimizer_state_roundtrip(self, tmp_path):
        ckpt = make_checkpoint(with_opt=True)
        p = tmp_path / "m.ckpt"
        save_checkpoint(ckpt, p)
        back = load_checkpoint(p)
        assert back.optimizer.t == 7
        assert back.optimizer.lr == pytest.approx(1e-3)
        np.testing.assert_array_equal(back.optimizer.m_a[0], ckpt.optimizer.m_a[0])
        np.testing.assert_array_equal(back.optimizer.v_b[-1], ckpt.optimizer.v_b[-1])

    def test_operator_registry_roundtrip(self, tmp_path):
        ckpt = make_checkpoint(m=2)
        p = tmp_path / "m.ckpt"
        save_checkpoint(ckpt, p)
        back = load_checkpoint(p)
        assert [s.name for s in back.operators] == ["gaussian", "denoise"]
        assert back.operators[0].id_code == 0.1
        assert back.operators[1].id_code == 0.2
        assert back.operators[1].kind == "restoration"
        assert back.m == 2

    def test_config_reconstructed(self, tmp_path):
        ckpt = make_checkpoint(channels=6)
        p = tmp_path / "m.ckpt"
        save_checkpoint(ckpt, p)
        back = load_checkpoint(p)
        cfg = back.config()
        assert len(cfg.layers) == 20
        assert cfg.channels == 6

    def test_save_is_deterministic(self, tmp_path):
        ckpt = make_checkpoint()
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(ckpt, p1)
        save_checkpoint(ckpt, p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestFormat:
    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "bad.ckpt"
        p.write_bytes(b"NOTACKPT" + b"\x00" * 64)
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(p)

    def test_unsupported_version_rejected(self, tmp_path):
        ckpt = make_checkpoint(with_opt=False)
        p = tmp_path / "m.ckpt"
        save_checkpoint(ckpt, p)
        data = bytearray(p.read_bytes())
        data[8] = 99  # bump the version field
        p.write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(p)

    def test_payload_is_float32_le(self, tmp_path):
        ckpt = make_checkpoint(with_opt=False)
        p = tmp_path / "m.ckpt"
        save_checkpoint(ckpt, p)
        data = p.read_bytes()
        import json
        import struct

        version, hlen = struct.unpack("<II", data[8:16])
        assert version == 1
        header = json.loads(data[16 : 16 + hlen])
        first = header["arrays"][0]
        count = int(np.prod(first["shape"]))
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=16 + hlen)
        np.testing.assert_array_equal(arr.reshape(first["shape"]), ckpt.hp.a[0])

    def test_unknown_operator_lookup(self, tmp_path):
        ckpt = make_checkpoint()
        with pytest.raises(CheckpointError, match="nope"):
            ckpt.operator_by_name("nope")

    def test_layout_documented(self):
        from pathlib import Path

        doc = Path(__file__).resolve().parents[1] / "docs" / "checkpoint_format.md"
        assert doc.exists(), "checkpoint byte layout must be documented in-repo"
        text = doc.read_text()
        assert "OPNETCKP" in text and "float32" in text
