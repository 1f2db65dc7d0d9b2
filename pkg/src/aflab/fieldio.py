"""Binary field dumps.

Layout: magic ``b"AFLD1\\0"``, little-endian ``u64 nx, u64 ny, f64 lx, f64 ly``,
then ``nx * ny`` little-endian f64 values, y outer and x inner.
"""
import struct
from pathlib import Path

import numpy as np

from aflab.grid import Grid

MAGIC = b"AFLD1\0"
_HEADER = struct.Struct("<QQdd")


class FormatError(ValueError):
    pass


def write_field(path, grid: Grid, values) -> None:
    a = np.asarray(values, dtype="<f8")
    if a.shape != grid.shape:
        raise FormatError(f"values shape {a.shape} does not match grid {grid.shape}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(grid.nx, grid.ny, grid.lx, grid.ly))
        fh.write(np.ascontiguousarray(a).tobytes())


def read_field(path) -> tuple[Grid, np.ndarray]:
    data = Path(path).read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: bad magic")
    off = len(MAGIC)
    if len(data) < off + _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    nx, ny, lx, ly = _HEADER.unpack_from(data, off)
    off += _HEADER.size
    expected = nx * ny * 8
    if len(data) - off != expected:
        raise FormatError(
            f"{path}: expected {expected} bytes of values for {nx}x{ny}, got {len(data) - off}")
    values = np.frombuffer(data, dtype="<f8", offset=off).reshape(ny, nx).astype(float)
    return Grid(int(nx), int(ny), float(lx), float(ly)), values
