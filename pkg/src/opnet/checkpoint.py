"""Versioned binary checkpoint container.

Byte layout (all integers little-endian; documented in docs/checkpoint_format.md):

    offset  size  field
    0       8     magic bytes "OPNETCKP"
    8       4     uint32 format version (currently 1)
    12      4     uint32 header length H
    16      H     JSON header, UTF-8
    16+H    ...   payload: float32 little-endian arrays, concatenated in
                  the order declared by the header's "arrays" list

The payload holds every fc layer's A_i (row-major, n_wi x m) and B_i, and,
when present, the optimizer's first/second moment arrays in the same
shapes.  The JSON header carries the base-network construction parameters,
the operator registry, optimizer hyperparameters and the iteration counter,
so an independent implementation can reconstruct the model from this file
alone.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basenet import BaseNetConfig
from .hypernet import HyperParams
from .operators import OperatorSpec

MAGIC = b"OPNETCKP"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class OptimizerState:
    """Adam moments per fc layer (empty lists for plain SGD)."""

    name: str = "adam"
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m_a: list = field(default_factory=list)
    v_a: list = field(default_factory=list)
    m_b: list = field(default_factory=list)
    v_b: list = field(default_factory=list)


@dataclass
class Checkpoint:
    basenet: dict  # construction kwargs for BaseNetConfig.standard
    operators: list[OperatorSpec]
    hp: HyperParams
    optimizer: OptimizerState | None = None
    iteration: int = 0
    train_meta: dict = field(default_factory=dict)

    def config(self) -> BaseNetConfig:
        kw = dict(self.basenet)
        kw["block_dilations"] = tuple(kw.get("block_dilations", (1, 1, 1, 2, 4, 1, 1)))
        return BaseNetConfig.standard(**kw)

    @property
    def m(self) -> int:
        return self.hp.m

    def operator_by_name(self, name: str) -> OperatorSpec:
        for spec in self.operators:
            if spec.name == name:
                return spec
        raise CheckpointError(
            f"operator {name!r} not in checkpoint (has: {[s.name for s in self.operators]})"
        )


def _spec_to_dict(spec: OperatorSpec) -> dict:
    return {
        "name": spec.name,
        "kind": spec.kind,
        "bounds": [list(b) for b in spec.bounds],
        "sampling": spec.sampling,
        "id_code": spec.id_code,
        "param_dim": spec.param_dim,
    }


def _spec_from_dict(d: dict) -> OperatorSpec:
    return OperatorSpec(
        name=d["name"],
        kind=d["kind"],
        bounds=tuple(tuple(b) for b in d["bounds"]),
        sampling=d["sampling"],
        id_code=d["id_code"],
        param_dim=d["param_dim"],
    )


def save_checkpoint(ckpt: Checkpoint, path):
    arrays: list[tuple[str, np.ndarray]] = []
    for i, (a, b) in enumerate(zip(ckpt.hp.a, ckpt.hp.b)):
        arrays.append((f"A_{i}", a))
        arrays.append((f"B_{i}", b))
    opt = ckpt.optimizer
    has_state = bool(opt and opt.m_a)
    if has_state:
        for i in range(len(ckpt.hp.a)):
            arrays.append((f"mA_{i}", opt.m_a[i]))
            arrays.append((f"vA_{i}", opt.v_a[i]))
            arrays.append((f"mB_{i}", opt.m_b[i]))
            arrays.append((f"vB_{i}", opt.v_b[i]))

    header = {
        "version": FORMAT_VERSION,
        "iteration": ckpt.iteration,
        "m": ckpt.hp.m,
        "basenet": ckpt.basenet,
        "operators": [_spec_to_dict(s) for s in ckpt.operators],
        "optimizer": None
        if opt is None
        else {
            "name": opt.name,
            "lr": opt.lr,
            "beta1": opt.beta1,
            "beta2": opt.beta2,
            "eps": opt.eps,
            "t": opt.t,
            "has_state": has_state,
        },
        "train_meta": ckpt.train_meta,
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        f.write(blob)
        for _, a in arrays:
            f.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def load_checkpoint(path) -> Checkpoint:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    version, hlen = struct.unpack("<II", data[8:16])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    header = json.loads(data[16 : 16 + hlen].decode("utf-8"))
    offset = 16 + hlen
    loaded: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
        offset += count * 4
        loaded[entry["name"]] = arr.reshape(shape).astype(np.float32)
    n_layers = sum(1 for n in loaded if n.startswith("A_"))
    hp = HyperParams(
        [loaded[f"A_{i}"] for i in range(n_layers)],
        [loaded[f"B_{i}"] for i in range(n_layers)],
    )
    opt = None
    if header.get("optimizer"):
        o = header["optimizer"]
        opt = OptimizerState(
            name=o["name"], lr=o["lr"], beta1=o["beta1"], beta2=o["beta2"], eps=o["eps"], t=o["t"]
        )
        if o.get("has_state"):
            opt.m_a = [loaded[f"mA_{i}"] for i in range(n_layers)]
            opt.v_a = [loaded[f"vA_{i}"] for i in range(n_layers)]
            opt.m_b = [loaded[f"mB_{i}"] for i in range(n_layers)]
            opt.v_b = [loaded[f"vB_{i}"] for i in range(n_layers)]
    ckpt = Checkpoint(
        basenet=header["basenet"],
        operators=[_spec_from_dict(d) for d in header["operators"]],
        hp=hp,
        optimizer=opt,
        iteration=header["iteration"],
        train_meta=header.get("train_meta", {}),
    )
    ckpt.config()  # validate reconstructability
    return ckpt
