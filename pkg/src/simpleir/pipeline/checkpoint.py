"""Binary checkpoints with quantize-on-save semantics.

Layout (all integers little-endian uint32):

    magic b"SIRK" | version | meta_len | meta JSON (utf-8, sorted keys)
    then one record per tensor until end of file:
    name_len | name utf-8 | rank | rank dims | float32 payload

Parameters are stored under their own names, optimizer moments under
``m.<name>`` and ``v.<name>``.  Storage is float32; at the instant of a
save the live parameters and moments are rounded to the same float32
values, so a run resumed from the checkpoint follows the identical
trajectory as one that kept going.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..curriculum import LossStats
from ..errors import CheckpointVersionError, DataError, FormatError
from ..model import ModelConfig, ParameterSet, parameter_shapes
from ..numerics import Tensor
from .optimizer import TrainState

__all__ = ["CHECKPOINT_VERSION", "save_checkpoint", "load_checkpoint", "file_digest"]

_MAGIC = b"SIRK"
CHECKPOINT_VERSION = 1


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _quantize(arr: np.ndarray) -> np.ndarray:
    """Round the live float64 buffer to float32 precision in place and
    return the float32 view that gets stored."""
    low = arr.astype(np.float32)
    arr[...] = low.astype(np.float64)
    return low


def _pack_tensor(name: str, low: np.ndarray) -> bytes:
    nb = name.encode("utf-8")
    head = struct.pack("<I", len(nb)) + nb
    head += struct.pack("<I", low.ndim)
    head += struct.pack(f"<{low.ndim}I", *low.shape)
    return head + np.ascontiguousarray(low, dtype="<f4").tobytes()


def save_checkpoint(path, state: TrainState, cfg: ModelConfig,
                    plan_order: tuple[str, ...],
                    archive_digests: dict[int, str]) -> None:
    """Write the checkpoint atomically and quantize the live state."""
    meta = {
        "config": asdict(cfg),
        "step": state.step,
        "seed": state.seed,
        "position": {"stage_index": state.stage_index,
                     "iteration": state.iteration,
                     "plan_order": list(plan_order)},
        "loss_stats": state.loss_stats.to_state() if state.loss_stats else None,
        "archives": {str(k): v for k, v in archive_digests.items()},
    }
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(blob)), blob]
    for name, tensor in state.params.items():
        parts.append(_pack_tensor(name, _quantize(tensor.data)))
    for name in state.params.names():
        parts.append(_pack_tensor(f"m.{name}", _quantize(state.first_moment[name])))
        parts.append(_pack_tensor(f"v.{name}", _quantize(state.second_moment[name])))
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(b"".join(parts))
    os.replace(tmp, path)


def load_checkpoint(path) -> tuple[TrainState, ModelConfig, tuple[str, ...], dict[int, str]]:
    """Read a checkpoint back: (state, config, plan order, archive digests)."""
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise FormatError(f"{path} is not a checkpoint file")
    if len(raw) < 12:
        raise DataError(f"checkpoint {path} is truncated")
    version, meta_len = struct.unpack_from("<II", raw, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint version {version} is not supported (expected "
            f"{CHECKPOINT_VERSION})")
    off = 12
    if off + meta_len > len(raw):
        raise DataError(f"checkpoint {path} is truncated")
    try:
        meta = json.loads(raw[off:off + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataError(f"checkpoint {path} has a corrupt header: {e}") from e
    off += meta_len

    tensors: dict[str, np.ndarray] = {}
    while off < len(raw):
        if off + 4 > len(raw):
            raise DataError(f"checkpoint {path} is truncated")
        (name_len,) = struct.unpack_from("<I", raw, off)
        off += 4
        name = raw[off:off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<I", raw, off)
        off += 4
        dims = struct.unpack_from(f"<{rank}I", raw, off)
        off += 4 * rank
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        end = off + 4 * count
        if end > len(raw):
            raise DataError(f"checkpoint {path} is truncated in tensor {name!r}")
        arr = np.frombuffer(raw[off:end], dtype="<f4").reshape(dims)
        tensors[name] = arr.astype(np.float64)
        off = end

    cfg = ModelConfig(**meta["config"])
    expected = parameter_shapes(cfg)
    entries: dict[str, Tensor] = {}
    first: dict[str, np.ndarray] = {}
    second: dict[str, np.ndarray] = {}
    for name, shape in expected.items():
        for key in (name, f"m.{name}", f"v.{name}"):
            arr = tensors.pop(key, None)
            if arr is None:
                raise DataError(f"checkpoint {path} is missing tensor {key!r}")
            if arr.shape != tuple(shape):
                raise DataError(
                    f"checkpoint tensor {key!r} has shape {arr.shape}, the "
                    f"stored config implies {tuple(shape)}")
            if key == name:
                entries[name] = Tensor(arr)
            elif key.startswith("m."):
                first[name] = arr
            else:
                second[name] = arr
    if tensors:
        raise DataError(
            f"checkpoint {path} contains unexpected tensors: "
            f"{sorted(tensors)[:5]}")

    ls = meta.get("loss_stats")
    state = TrainState(
        params=ParameterSet(entries), first_moment=first, second_moment=second,
        step=int(meta["step"]), seed=int(meta["seed"]),
        stage_index=int(meta["position"]["stage_index"]),
        iteration=int(meta["position"]["iteration"]),
        loss_stats=LossStats.from_state(ls) if ls else None)
    plan_order = tuple(meta["position"]["plan_order"])
    digests = {int(k): str(v) for k, v in meta.get("archives", {}).items()}
    return state, cfg, plan_order, digests
