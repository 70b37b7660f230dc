"""Self-describing checkpoint container.

Layout (all integers little-endian)::

    8 bytes   magic b"MOBICKPT"
    4 bytes   format version (uint32)
    8 bytes   header length H (uint64)
    H bytes   UTF-8 JSON header, keys sorted, no whitespace
    ...       raw tensor bytes, concatenated in header order

The header holds ``meta`` (stage, mode, counters, config snapshot,
optimizer hyper-parameters) and ``tensors``, a list of
``{name, dtype, shape, offset, nbytes}`` entries with offsets relative to
the start of the payload.  Tensors are written in sorted name order, so
saving a loaded checkpoint reproduces the original bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

MAGIC = b"MOBICKPT"
FORMAT_VERSION = 1
_DTYPES = {"float32", "float64", "int64", "uint8", "bool"}


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    stage: str
    mode: str
    step: int
    updates: int
    tensors: dict = field(default_factory=dict)  # name -> np.ndarray
    meta: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def to_bytes(self) -> bytes:
        entries = []
        chunks = []
        offset = 0
        for name in sorted(self.tensors):
            arr = np.ascontiguousarray(self.tensors[name])
            dt = arr.dtype.name
            if dt not in _DTYPES:
                raise CheckpointError(f"unsupported dtype {dt} for {name}")
            raw = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
            entries.append({"name": name, "dtype": dt, "shape": list(arr.shape),
                            "offset": offset, "nbytes": len(raw)})
            chunks.append(raw)
            offset += len(raw)
        header = {"stage": self.stage, "mode": self.mode, "step": int(self.step),
                  "updates": int(self.updates), "meta": self.meta, "tensors": entries}
        hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return b"".join([MAGIC, struct.pack("<IQ", self.format_version, len(hbytes)), hbytes] + chunks)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Checkpoint":
        if data[:8] != MAGIC:
            raise CheckpointError("not a checkpoint file (bad magic)")
        version, hlen = struct.unpack("<IQ", data[8:20])
        if version != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        header = json.loads(data[20:20 + hlen].decode("utf-8"))
        base = 20 + hlen
        tensors = {}
        for e in header["tensors"]:
            start = base + e["offset"]
            raw = data[start:start + e["nbytes"]]
            if len(raw) != e["nbytes"]:
                raise CheckpointError(f"truncated tensor {e['name']}")
            dt = np.dtype(e["dtype"]).newbyteorder("<")
            tensors[e["name"]] = np.frombuffer(raw, dtype=dt).reshape(e["shape"]).astype(e["dtype"])
        return cls(header["stage"], header["mode"], header["step"], header["updates"], tensors,
                   header["meta"], version)

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(ckpt.to_bytes())
    tmp.replace(path)
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    return Checkpoint.from_bytes(Path(path).read_bytes())


def _np(t: torch.Tensor) -> np.ndarray:
    return t.detach().cpu().numpy().copy()


def pack_training_state(net, optimizer, generator: torch.Generator | None) -> tuple[dict, dict]:
    """Flatten network, normalizer, optimizer and RNG state into tensors + JSON meta."""
    tensors = {f"net.{k}": _np(v) for k, v in net.state_dict().items()}
    norm = net.normalizer.state_dict()
    for k in ("mean", "var", "count"):
        tensors[f"normalizer.{k}"] = norm[k]
    meta = {"normalizer": {"clip": norm["clip"], "eps": norm["eps"]}}
    if optimizer is not None:
        sd = optimizer.state_dict()
        for idx, st in sd["state"].items():
            for key, val in st.items():
                tensors[f"optim.state.{idx}.{key}"] = _np(torch.as_tensor(val))
        meta["optim_param_groups"] = sd["param_groups"]
    if generator is not None:
        tensors["rng.torch"] = _np(generator.get_state())
    return tensors, meta


def restore_network(net, ckpt: Checkpoint):
    state = {k[len("net."):]: torch.from_numpy(v.copy()) for k, v in ckpt.tensors.items()
             if k.startswith("net.")}
    net.load_state_dict(state)
    meta = ckpt.meta.get("normalizer", {})
    net.normalizer.load_state_dict({
        "mean": ckpt.tensors["normalizer.mean"], "var": ckpt.tensors["normalizer.var"],
        "count": ckpt.tensors["normalizer.count"], **meta})


def restore_optimizer(optimizer, ckpt: Checkpoint):
    groups = ckpt.meta.get("optim_param_groups")
    if groups is None:
        return
    state: dict = {}
    for name, arr in ckpt.tensors.items():
        if name.startswith("optim.state."):
            _, _, idx, key = name.split(".", 3)
            state.setdefault(int(idx), {})[key] = torch.from_numpy(arr.copy())
    optimizer.load_state_dict({"state": state, "param_groups": groups})


def restore_generator(generator: torch.Generator, ckpt: Checkpoint):
    if "rng.torch" in ckpt.tensors:
        generator.set_state(torch.from_numpy(ckpt.tensors["rng.torch"].copy()))
