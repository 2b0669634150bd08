"""Binary embedding file I/O.

This is the wire contract shared with the embedding exporter. Layout,
little-endian: magic bytes ``SLEM``, u32 version, u64 row count, u32 dim,
then count x dim 32-bit floats, row-major. Row i carries the embedding of
record id i. A JSON manifest may sit next to the file at ``<path>.json``.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import EmbeddingFormatError
from .geometry import EmbeddingMatrix

MAGIC = b"SLEM"
VERSION = 1

_HEADER = struct.Struct("<4sIQI")


def manifest_path(path: str | Path) -> Path:
    return Path(str(path) + ".json")


def write_embeddings(path: str | Path, vectors, *, manifest: dict | None = None) -> None:
    """Write rows as float32, atomically (temp file + rename)."""
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim != 2:
        raise EmbeddingFormatError(f"expected a 2-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise EmbeddingFormatError("matrix contains non-finite values")
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
    if manifest is not None:
        manifest_path(p).write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )


def read_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Load a file written by :func:`write_embeddings`; ids are 0..count-1."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise EmbeddingFormatError(f"{path}: truncated header")
    magic, version, count, dim = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise EmbeddingFormatError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + count * dim * 4
    if len(blob) != expected:
        raise EmbeddingFormatError(f"{path}: expected {expected} bytes, file holds {len(blob)}")
    data = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).astype(np.float64)
    return EmbeddingMatrix(
        vectors=data.reshape(count, dim),
        ids=np.arange(count, dtype=np.int64),
    )


def read_manifest(path: str | Path) -> dict | None:
    mp = manifest_path(path)
    if not mp.exists():
        return None
    return json.loads(mp.read_text(encoding="utf-8"))
