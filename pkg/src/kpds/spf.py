"""SPF1 snapshot files: self-describing single-field dumps.

Layout (little-endian):

    magic   4 bytes  "SPF1"
    version u32      currently 1
    nx, ny  u32, u32
    lx, ly  f64, f64
    t       f64
    flag    u8       0 = real payload, 1 = complex (re, im pairs)
    payload row-major f64, nx*ny values (or 2*nx*ny if complex)
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from kpds.grid import Grid2D

MAGIC = b"SPF1"
VERSION = 1
_HEADER = struct.Struct("<4sIIIdddB")


def write_spf1(path, u: np.ndarray, grid: Grid2D, t: float) -> None:
    u = np.asarray(u)
    if u.shape != grid.shape:
        raise ValueError(f"field shape {u.shape} does not match grid {grid.shape}")
    is_complex = np.iscomplexobj(u)
    header = _HEADER.pack(MAGIC, VERSION, grid.nx, grid.ny,
                          grid.lx, grid.ly, t, 1 if is_complex else 0)
    if is_complex:
        payload = np.empty((grid.nx, grid.ny, 2))
        payload[..., 0] = u.real
        payload[..., 1] = u.imag
    else:
        payload = u.astype(np.float64, copy=False)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())


def read_spf1(path) -> tuple[np.ndarray, Grid2D, float]:
    raw = Path(path).read_bytes()
    magic, version, nx, ny, lx, ly, t, flag = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ValueError(f"not an SPF1 file: magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"unsupported SPF1 version {version}")
    count = nx * ny * (2 if flag else 1)
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size, count=count)
    grid = Grid2D(nx=nx, ny=ny, lx=lx, ly=ly)
    if flag:
        pairs = data.reshape(nx, ny, 2)
        return pairs[..., 0] + 1j * pairs[..., 1], grid, t
    return data.reshape(nx, ny).copy(), grid, t
