"""Self-describing binary dumps of space-time fields, plus CSV export.

Layout (little-endian): ``b"CHSF"``, u32 version, u32 dim, u32 ntime,
``dim`` x u32 counts, f64 dt, then ``ntime * prod(counts)`` f64 values in
row-major order (time slowest).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"CHSF"
VERSION = 1


@dataclass(frozen=True)
class FieldHeader:
    version: int
    dim: int
    ntime: int
    counts: tuple[int, ...]
    dt: float


def write_field(path, values, counts, dt: float) -> Path:
    path = Path(path)
    arr = np.asarray(values, dtype="<f8")
    if arr.ndim == 1:
        arr = arr[None]
    counts = tuple(int(c) for c in counts)
    n = int(np.prod(counts))
    arr = arr.reshape(arr.shape[0], -1)
    if arr.shape[1] != n:
        raise ValueError(f"field has {arr.shape[1]} nodes per slice, counts imply {n}")
    header = struct.pack(f"<4sIII{len(counts)}Id", MAGIC, VERSION, len(counts), arr.shape[0], *counts, float(dt))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(arr).tobytes())
    return path


def read_field(path) -> tuple[np.ndarray, FieldHeader]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a field dump (bad magic)")
    version, dim, ntime = struct.unpack_from("<III", data, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    counts = struct.unpack_from(f"<{dim}I", data, 16)
    off = 16 + 4 * dim
    (dt,) = struct.unpack_from("<d", data, off)
    off += 8
    n = int(np.prod(counts))
    payload = np.frombuffer(data, dtype="<f8", offset=off)
    if payload.size != ntime * n:
        raise ValueError(f"{path}: payload has {payload.size} values, header implies {ntime * n}")
    return payload.reshape(ntime, n).astype(float), FieldHeader(version, dim, ntime, tuple(counts), dt)


def write_csv(path, values, dt: float) -> Path:
    """One row per time slice: ``t, v_0, v_1, ...``."""
    path = Path(path)
    arr = np.atleast_2d(np.asarray(values, dtype=float))
    t = dt * np.arange(arr.shape[0])
    np.savetxt(path, np.column_stack([t, arr]), delimiter=",", fmt="%.17g",
               header="t," + ",".join(f"n{i}" for i in range(arr.shape[1])), comments="")
    return path
