"""IGHF binary snapshots.

Layout (little-endian)::

    offset  size  field
    0       4     magic b"IGHF"
    4       4     format version, u32
    8       4     n, u32
    12      8     L, f64
    20      8     t, f64
    28      8     b, f64
    36      8     gamma, f64
    44      8     p, f64
    52      16n^3 payload: (re, im) f64 pairs, row-major (C order)
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import FormatError

MAGIC = b"IGHF"
VERSION = 1
HEADER = struct.Struct("<4sII5d")


@dataclass
class SnapshotHeader:
    version: int
    n: int
    L: float
    t: float
    b: float
    gamma: float
    p: float


def write_snapshot(path, u: np.ndarray, L: float, t: float, b: float, gamma: float, p: float):
    """Write ``u`` (n x n x n) and metadata; the file appears atomically."""
    u = np.asarray(u)
    n = u.shape[0]
    if u.shape != (n, n, n):
        raise ValueError("snapshot field must be a cube")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    payload = np.ascontiguousarray(u, dtype="<c16")
    with open(tmp, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, n, float(L), float(t), float(b), float(gamma), float(p)))
        fh.write(payload.tobytes(order="C"))
    os.replace(tmp, path)
    return path


def write_state(path, state, model):
    """Write a :class:`~ighartree.evolve.SimState` with the model's grid and parameters."""
    pr = model.params
    return write_snapshot(path, state.u, model.grid.L, state.t, pr.b, pr.gamma, pr.p)


def read_header(path) -> SnapshotHeader:
    with open(path, "rb") as fh:
        raw = fh.read(HEADER.size)
    return _parse_header(raw)


def _parse_header(raw: bytes) -> SnapshotHeader:
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise FormatError("bad magic, not an IGHF snapshot", 0)
    if len(raw) < 8:
        raise FormatError("truncated header", len(raw))
    version = struct.unpack_from("<I", raw, 4)[0]
    if version != VERSION:
        raise FormatError(f"unsupported IGHF version {version} (expected {VERSION})", 4)
    if len(raw) < HEADER.size:
        raise FormatError("truncated header", len(raw))
    _, version, n, L, t, b, gamma, p = HEADER.unpack(raw[:HEADER.size])
    return SnapshotHeader(version, n, L, t, b, gamma, p)


def read_snapshot(path, with_header: bool = False):
    """Read a snapshot. Raises FormatError on wrong magic/version or truncation."""
    data = Path(path).read_bytes()
    hdr = _parse_header(data[:HEADER.size])
    need = HEADER.size + 16 * hdr.n**3
    if len(data) < need:
        raise FormatError(f"truncated payload: expected {need} bytes, file ends at byte {len(data)}", len(data))
    if len(data) > need:
        raise FormatError(f"trailing bytes after payload at byte {need}", need)
    u = np.frombuffer(data, dtype="<c16", count=hdr.n**3, offset=HEADER.size).reshape((hdr.n,) * 3)
    u = u.astype(complex)
    return (u, hdr) if with_header else u
