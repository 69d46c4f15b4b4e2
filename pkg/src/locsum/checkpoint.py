"""Versioned binary checkpoint for trained locator parameters.

Layout (all little-endian):

    magic "QLOC" | u32 version
    u32 embed_dim | u32 out_channels | u32 kernel_size | u32 proj_dim
    u32 hidden_dim | u32 length_norm | f64 leaky_slope | u8 shared_conv
    parameter tensors as raw float64, in declared order
    (query-branch kernel and bias appended when shared_conv is 0)

A JSON sidecar at ``<path>.json`` carries the same configuration plus the
training log for human inspection.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .locator import LocatorParams
from .training import TrainingLog

MAGIC = b"QLOC"
VERSION = 1
_HEADER = struct.Struct("<4sI")
_CONFIG = struct.Struct("<IIIIIIdB")


@dataclass(frozen=True)
class CheckpointMeta:
    embed_dim: int
    out_channels: int
    kernel_size: int
    proj_dim: int
    hidden_dim: int
    length_norm: int
    leaky_slope: float
    shared_conv: bool


def _tensor_shapes(meta: CheckpointMeta) -> list[tuple[str, tuple[int, ...]]]:
    d, c, k = meta.embed_dim, meta.out_channels, meta.kernel_size
    e, h = meta.proj_dim, meta.hidden_dim
    shapes = [
        ("conv_kernel", (c, k, d)),
        ("conv_bias", (c,)),
        ("w1", (e, c)),
        ("b1", (e,)),
        ("w2", (h, 2 * e + 2)),
        ("b2", (h,)),
        ("w3", (2, h)),
        ("b3", (2,)),
    ]
    if not meta.shared_conv:
        shapes.append(("conv_kernel_q", (c, k, d)))
        shapes.append(("conv_bias_q", (c,)))
    return shapes


def save_checkpoint(
    path: Path | str,
    params: LocatorParams,
    length_norm: int,
    training_log: TrainingLog | None = None,
) -> None:
    path = Path(path)
    meta = CheckpointMeta(
        embed_dim=params.embed_dim,
        out_channels=params.out_channels,
        kernel_size=params.kernel_size,
        proj_dim=params.proj_dim,
        hidden_dim=params.hidden_dim,
        length_norm=length_norm,
        leaky_slope=params.leaky_slope,
        shared_conv=params.conv_kernel_q is None,
    )
    blob = bytearray()
    blob += _HEADER.pack(MAGIC, VERSION)
    blob += _CONFIG.pack(
        meta.embed_dim,
        meta.out_channels,
        meta.kernel_size,
        meta.proj_dim,
        meta.hidden_dim,
        meta.length_norm,
        meta.leaky_slope,
        1 if meta.shared_conv else 0,
    )
    for _, tensor in params.tensors():
        blob += np.ascontiguousarray(tensor, dtype="<f8").tobytes()
    path.write_bytes(bytes(blob))

    sidecar = {"config": asdict(meta)}
    if training_log is not None:
        sidecar["training"] = training_log.to_dict()
    Path(str(path) + ".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True), encoding="utf-8"
    )


def load_checkpoint(path: Path | str) -> tuple[LocatorParams, CheckpointMeta]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size + _CONFIG.size:
        raise SchemaError(f"checkpoint {str(path)!r} is truncated")
    magic, version = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise SchemaError(f"{str(path)!r} is not a locator checkpoint")
    if version != VERSION:
        raise SchemaError(f"unsupported checkpoint version {version}")
    fields = _CONFIG.unpack_from(raw, _HEADER.size)
    meta = CheckpointMeta(
        embed_dim=fields[0],
        out_channels=fields[1],
        kernel_size=fields[2],
        proj_dim=fields[3],
        hidden_dim=fields[4],
        length_norm=fields[5],
        leaky_slope=fields[6],
        shared_conv=bool(fields[7]),
    )
    if not 0.0 < meta.leaky_slope < 1.0 or meta.length_norm < 1 or min(fields[:5]) < 1:
        raise SchemaError(f"checkpoint {str(path)!r} has an implausible config block")
    offset = _HEADER.size + _CONFIG.size
    tensors: dict[str, np.ndarray] = {}
    for name, shape in _tensor_shapes(meta):
        count = int(np.prod(shape))
        end = offset + count * 8
        if end > len(raw):
            raise SchemaError(f"checkpoint {str(path)!r} is truncated at tensor {name}")
        tensors[name] = (
            np.frombuffer(raw[offset:end], dtype="<f8").reshape(shape).copy()
        )
        offset = end
    if offset != len(raw):
        raise SchemaError(f"checkpoint {str(path)!r} has {len(raw) - offset} trailing bytes")
    params = LocatorParams(leaky_slope=meta.leaky_slope, **tensors)
    return params, meta
