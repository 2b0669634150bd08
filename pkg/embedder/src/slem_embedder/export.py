"""Export orchestration: dataset in, embedding file + manifest out."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .encoder import encode_texts
from .records import read_records
from .slemfile import write_matrix

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ExportManifest:
    model_id: str
    layer: int
    include_boundary_tokens: bool
    dim: int
    count: int
    dataset_sha256: str
    truncated_record_ids: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "model_id": self.model_id,
            "layer": self.layer,
            "include_boundary_tokens": self.include_boundary_tokens,
            "dim": self.dim,
            "count": self.count,
            "dataset_sha256": self.dataset_sha256,
            "truncated_record_ids": list(self.truncated_record_ids),
        }


def manifest_path(out_path: str | Path) -> Path:
    return Path(str(out_path) + ".json")


def dataset_checksum(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def export_embeddings(
    dataset_path: str | Path,
    out_path: str | Path,
    tokenizer,
    model,
    model_id: str,
    *,
    layer: int = -1,
    include_boundary_tokens: bool = False,
    batch_size: int = 32,
    max_length: int | None = None,
    device: str = "cpu",
) -> ExportManifest:
    """Encode every record and write the embedding file plus its manifest.

    Row order equals record id order; texts longer than the encoder's
    maximum length are truncated and their ids recorded in the manifest.
    """
    records = read_records(dataset_path)
    matrix, truncated = encode_texts(
        tokenizer,
        model,
        [rec.text for rec in records],
        layer=layer,
        include_boundary_tokens=include_boundary_tokens,
        batch_size=batch_size,
        max_length=max_length,
        device=device,
    )
    manifest = ExportManifest(
        model_id=model_id,
        layer=layer,
        include_boundary_tokens=include_boundary_tokens,
        dim=int(matrix.shape[1]),
        count=int(matrix.shape[0]),
        dataset_sha256=dataset_checksum(dataset_path),
        truncated_record_ids=tuple(rec.id for rec in (records[i] for i in truncated)),
    )
    write_matrix(out_path, matrix)
    manifest_path(out_path).write_text(
        json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return manifest
