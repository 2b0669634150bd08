"""Binary embedding file writer/reader.

This mirrors the normative wire format shared with the retrieval engine:
little-endian magic ``SLEM``, u32 version, u64 row count, u32 dim, then
count x dim float32 values row-major. Row i belongs to record id i.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"SLEM"
VERSION = 1

_HEADER = struct.Struct("<4sIQI")


class SlemFormatError(ValueError):
    pass


def write_matrix(path: str | Path, matrix: np.ndarray) -> None:
    """Atomic write (temp file + rename) of a 2-d float matrix as float32."""
    arr = np.asarray(matrix)
    if arr.ndim != 2:
        raise SlemFormatError(f"expected a 2-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SlemFormatError("matrix contains non-finite values")
    count, dim = arr.shape
    payload = _HEADER.pack(MAGIC, VERSION, count, dim) + arr.astype("<f4").tobytes(order="C")
    p = Path(path)
    fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=p.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, p)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_matrix(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise SlemFormatError(f"{path}: truncated header")
    magic, version, count, dim = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise SlemFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SlemFormatError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + count * dim * 4
    if len(blob) != expected:
        raise SlemFormatError(f"{path}: expected {expected} bytes, file holds {len(blob)}")
    return np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(count, dim).copy()
