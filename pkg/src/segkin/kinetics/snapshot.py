"""Flat binary phase-space snapshots.

Layout (little-endian): int64 Nx, int64 Nv, float64 t, then f1 and f2 as
row-major (Nx, Nv) float64 arrays.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import ConfigurationError

_HEADER = np.dtype([("nx", "<i8"), ("nv", "<i8"), ("t", "<f8")])


def write_snapshot(path: str | Path, f1, f2, t: float) -> None:
    f1 = np.asarray(f1, dtype="<f8")
    f2 = np.asarray(f2, dtype="<f8")
    if f1.ndim != 2 or f1.shape != f2.shape:
        raise ConfigurationError("snapshot needs two arrays of equal shape (Nx, Nv)")
    header = np.array([(f1.shape[0], f1.shape[1], float(t))], dtype=_HEADER)
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(np.ascontiguousarray(f1).tobytes())
        fh.write(np.ascontiguousarray(f2).tobytes())


def read_snapshot(path: str | Path) -> tuple[np.ndarray, np.ndarray, float]:
    """(f1, f2, t) from a snapshot file."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.itemsize:
        raise ConfigurationError(f"{path}: truncated snapshot header")
    head = np.frombuffer(raw[:_HEADER.itemsize], dtype=_HEADER)[0]
    nx, nv = int(head["nx"]), int(head["nv"])
    if nx <= 0 or nv <= 0 or len(raw) != _HEADER.itemsize + 16 * nx * nv:
        raise ConfigurationError(f"{path}: size does not match header ({nx} x {nv})")
    data = np.frombuffer(raw[_HEADER.itemsize:], dtype="<f8").reshape(2, nx, nv)
    return data[0].astype(float), data[1].astype(float), float(head["t"])
