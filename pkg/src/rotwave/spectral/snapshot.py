"""RPK1 field snapshots: ASCII header line, then N*N little-endian (re, im) float64 pairs, row-major."""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .grid import ComplexField, Grid

MAGIC = "RPK1"
_HEADER = re.compile(r"^RPK1 d=(\d+) N=(\d+) L=(\S+) t=(\S+)$")


def snapshot_bytes(field: ComplexField) -> bytes:
    g = field.grid
    header = f"{MAGIC} d={g.d} N={g.N} L={float(g.L)!r} t={float(field.t)!r}\n"
    return header.encode("ascii") + np.ascontiguousarray(field.values, dtype="<c16").tobytes()


def write_snapshot(path, field: ComplexField) -> Path:
    path = Path(path)
    path.write_bytes(snapshot_bytes(field))
    return path


def parse_snapshot(data: bytes) -> ComplexField:
    nl = data.index(b"\n")
    m = _HEADER.match(data[:nl].decode("ascii"))
    if not m:
        raise ValueError(f"not an RPK1 snapshot header: {data[:nl][:80]!r}")
    d, N, L, t = int(m[1]), int(m[2]), float(m[3]), float(m[4])
    body = data[nl + 1 :]
    if len(body) != N * N * 16:
        raise ValueError(f"expected {N * N * 16} payload bytes, got {len(body)}")
    values = np.frombuffer(body, dtype="<c16").reshape(N, N).astype(complex)
    return ComplexField(Grid(N, L, d), values, t)


def read_snapshot(path) -> ComplexField:
    return parse_snapshot(Path(path).read_bytes())
