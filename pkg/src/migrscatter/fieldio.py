"""Reproducible binary field files.

Layout (all integers little-endian):

    bytes 0..7    magic ``MIGRFLD1``
    u32           rank, always 3
    3 x u64       dims (nx, ny, nz)
    u8            dtype: 0 = real64, 1 = complex128 interleaved
    3 x f64       origin
    3 x f64       spacing
    payload       raw row-major node values (z fastest)

Optional sidecar metadata is UTF-8 ``key: value`` text stored next to the
field with the same stem and a ``.meta`` suffix.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FieldFormatError
from .grid import ComplexField, Grid3, ScalarField

MAGIC = b"MIGRFLD1"
_DTYPE_REAL = 0
_DTYPE_COMPLEX = 1
_HEADER = struct.Struct("<8sI3QB3d3d")


def write_field(field, path, metadata=None):
    """Write a field; round-trips bit-exactly through read_field."""
    path = Path(path)
    if isinstance(field, ScalarField):
        dtype_tag, payload = _DTYPE_REAL, field.values.astype("<f8")
    elif isinstance(field, ComplexField):
        dtype_tag, payload = _DTYPE_COMPLEX, field.values.astype("<c16")
    else:
        raise TypeError("write_field expects a ScalarField or ComplexField")
    g = field.grid
    header = _HEADER.pack(MAGIC, 3, *[np.uint64(n) for n in g.counts],
                          dtype_tag, *g.origin, *g.spacing)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(payload).tobytes())
    if metadata is not None:
        write_sidecar(path, metadata)
    return path


def read_field(path):
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise FieldFormatError(f"{path}: truncated header")
        magic, rank, nx, ny, nz, dtype_tag, ox, oy, oz, hx, hy, hz = \
            _HEADER.unpack(raw)
        if magic != MAGIC:
            raise FieldFormatError(f"{path}: bad magic {magic!r}")
        if rank != 3:
            raise FieldFormatError(f"{path}: unsupported rank {rank}")
        if dtype_tag == _DTYPE_REAL:
            dtype, cls = np.dtype("<f8"), ScalarField
        elif dtype_tag == _DTYPE_COMPLEX:
            dtype, cls = np.dtype("<c16"), ComplexField
        else:
            raise FieldFormatError(f"{path}: unknown dtype tag {dtype_tag}")
        count = int(nx * ny * nz)
        payload = fh.read(count * dtype.itemsize)
        if len(payload) != count * dtype.itemsize:
            raise FieldFormatError(
                f"{path}: truncated payload "
                f"({len(payload)} of {count * dtype.itemsize} bytes)")
    grid = Grid3((ox, oy, oz), (hx, hy, hz), (int(nx), int(ny), int(nz)))
    values = np.frombuffer(payload, dtype=dtype).reshape(grid.shape)
    return cls(grid, values)


def sidecar_path(path):
    return Path(path).with_suffix(".meta")


def write_sidecar(path, metadata):
    lines = [f"{k}: {v}" for k, v in metadata.items()]
    sidecar_path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_sidecar(path):
    text = sidecar_path(path).read_text(encoding="utf-8")
    meta = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        key, _, value = line.partition(":")
        meta[key.strip()] = value.strip()
    return meta
