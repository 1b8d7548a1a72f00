"""Checkpoint container: length-prefixed JSON header + raw LE buffers.

Byte layout (documented in README under "Checkpoint format"):

    bytes 0..7    little-endian uint64: header length L in bytes
    bytes 8..8+L  UTF-8 JSON header
    bytes 8+L..   raw buffer section

Header schema::

    {
      "tensors": {name: {"shape": [...], "dtype": "float32"|"float64",
                         "offset": int}},   # offset into the buffer section
      "meta": {...}                          # free-form (model config, step)
    }

Buffers are raw little-endian IEEE-754, row-major, concatenated in header
order with no padding.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from .autograd import Tensor

_DTYPES = {"float32": np.dtype("<f4"), "float64": np.dtype("<f8")}


def save_tensors(path: str | Path, tensors: Mapping[str, Tensor | np.ndarray], meta: dict | None = None) -> None:
    entries: dict[str, dict] = {}
    buffers: list[bytes] = []
    offset = 0
    for name, t in tensors.items():
        arr = t.data if isinstance(t, Tensor) else np.asarray(t)
        dtype_name = arr.dtype.name
        if dtype_name not in _DTYPES:
            raise ValueError(f"unsupported checkpoint dtype {dtype_name} for {name}")
        raw = np.ascontiguousarray(arr).astype(_DTYPES[dtype_name]).tobytes()
        entries[name] = {"shape": list(arr.shape), "dtype": dtype_name, "offset": offset}
        buffers.append(raw)
        offset += len(raw)

    header = json.dumps({"tensors": entries, "meta": meta or {}}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for raw in buffers:
            fh.write(raw)


def load_tensors(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    blob = Path(path).read_bytes()
    if len(blob) < 8:
        raise ValueError(f"{path} is not a checkpoint file")
    (hlen,) = struct.unpack("<Q", blob[:8])
    header = json.loads(blob[8 : 8 + hlen].decode("utf-8"))
    base = 8 + hlen
    out: dict[str, np.ndarray] = {}
    for name, entry in header["tensors"].items():
        dtype = _DTYPES[entry["dtype"]]
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = base + entry["offset"]
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=start).reshape(shape)
        out[name] = arr.astype(entry["dtype"], copy=True)
    return out, header.get("meta", {})


def save_model(path: str | Path, model, meta: dict | None = None) -> None:
    """Serialize a Module's registry plus its config into one container."""
    from dataclasses import asdict

    info = dict(meta or {})
    info["model_config"] = asdict(model.cfg)
    save_tensors(path, model.named_parameters(), info)


def load_model(path: str | Path):
    """Rebuild a SegModel from a checkpoint written by save_model."""
    from .config import ModelConfig
    from .model import SegModel

    tensors, meta = load_tensors(path)
    if "model_config" not in meta:
        raise ValueError(f"{path} lacks a model_config header entry")
    cfg = ModelConfig(**meta["model_config"])
    model = SegModel(cfg, seed=0)
    params = model.named_parameters()
    missing = set(params) - set(tensors)
    if missing:
        raise ValueError(f"checkpoint misses parameters: {sorted(missing)[:4]} ...")
    for name, p in params.items():
        arr = tensors[name]
        if tuple(arr.shape) != p.shape:
            raise ValueError(f"checkpoint shape mismatch for {name}: {arr.shape} vs {p.shape}")
        p.data = arr.astype(p.data.dtype, copy=True)
    return model, meta
