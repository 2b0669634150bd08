"""Labeled text collections: loading, saving, and train/test overlap filtering.

Record line format: UTF-8, one record per line, ``text<TAB>label``. An
optional sidecar manifest at ``<path>.manifest`` (``key = value`` lines) may
declare ``language``, ``instruction``, and an ordered ``labels`` list. Ids
are assigned by file order starting at 0 and are never reused: a filtered
collection keeps its original ids so embedding rows stay aligned.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterator

from .errors import EmptyDatasetError, ParseError
from .kvfile import parse_list, read_kv

MANIFEST_SUFFIX = ".manifest"

_WS_RUN = re.compile(r"\s+")


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


def canonicalize(text: str) -> str:
    """Lowercase, collapse whitespace runs to single spaces, trim the ends."""
    return _WS_RUN.sub(" ", text.strip()).lower()


@dataclass(frozen=True)
class DatasetRecord:
    id: int
    text: str
    label: str
    language: str
    split: Split

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError(f"record id must be non-negative, got {self.id}")
        if not self.text.strip():
            raise ValueError("record text is empty after trimming")
        if not self.label:
            raise ValueError("record label is empty")


@dataclass(frozen=True)
class DatasetCollection:
    records: tuple[DatasetRecord, ...]
    label_set: tuple[str, ...]
    task_instruction: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        object.__setattr__(self, "label_set", tuple(self.label_set))
        if not self.label_set:
            raise ValueError("label_set is empty")
        if len(set(self.label_set)) != len(self.label_set):
            raise ValueError("label_set contains duplicates")
        allowed = set(self.label_set)
        seen: set[int] = set()
        for rec in self.records:
            if rec.id in seen:
                raise ValueError(f"duplicate record id {rec.id}")
            seen.add(rec.id)
            if rec.label not in allowed:
                raise ValueError(
                    f"record {rec.id} has label {rec.label!r} outside the declared label set"
                )

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[DatasetRecord]:
        return iter(self.records)

    @property
    def language(self) -> str:
        return self.records[0].language if self.records else ""

    def by_id(self) -> dict[int, DatasetRecord]:
        return {rec.id: rec for rec in self.records}

    def labels_by_id(self) -> dict[int, str]:
        return {rec.id: rec.label for rec in self.records}


@dataclass(frozen=True)
class OverlapReport:
    removed_ids: tuple[int, ...]
    overlap_rate: float
    normalization: str


def _manifest_path(path: Path) -> Path:
    return Path(str(path) + MANIFEST_SUFFIX)


def _read_manifest(path: Path) -> dict[str, str]:
    mp = _manifest_path(path)
    return read_kv(mp) if mp.exists() else {}


def load_dataset(
    path: str | Path,
    language: str | None = None,
    split: Split | str = Split.TRAIN,
) -> DatasetCollection:
    """Read a record file; ids follow line order from 0.

    The label set is the sorted set of distinct labels unless the sidecar
    manifest declares an ordered ``labels`` list.
    """
    p = Path(path)
    split = Split(split)
    manifest = _read_manifest(p)
    if language is None:
        language = manifest.get("language")
    if not language:
        raise ParseError("no language given and none declared in the manifest", path=p)

    raw = p.read_text(encoding="utf-8")
    records: list[DatasetRecord] = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if "\t" not in line:
            raise ParseError(f"no tab separator in {line!r}", path=p, line=lineno)
        text, _, label = line.rpartition("\t")
        if not text.strip():
            raise ParseError("blank text field", path=p, line=lineno)
        label = label.strip()
        if not label:
            raise ParseError("blank label field", path=p, line=lineno)
        records.append(
            DatasetRecord(id=lineno - 1, text=text, label=label, language=language, split=split)
        )
    if not records:
        raise EmptyDatasetError(f"{p} contains no records")

    if "labels" in manifest:
        label_set = tuple(parse_list(manifest["labels"]))
        extra = {rec.label for rec in records} - set(label_set)
        if extra:
            raise ParseError(f"labels {sorted(extra)} not declared in the manifest", path=p)
    else:
        label_set = tuple(sorted({rec.label for rec in records}))
    return DatasetCollection(
        records=tuple(records),
        label_set=label_set,
        task_instruction=manifest.get("instruction", ""),
    )


def save_dataset(collection: DatasetCollection, path: str | Path, *, write_manifest: bool = True) -> None:
    """Write the record line format plus a sidecar manifest.

    The line format has no id column: loading assigns ids by line order, so
    only collections with contiguous 0..N-1 ids round-trip their ids.
    """
    p = Path(path)
    lines = []
    for rec in collection.records:
        if "\n" in rec.text or "\r" in rec.text:
            raise ParseError(
                f"record {rec.id}: newlines in text are not representable in the line format",
                path=p,
            )
        if any(ch in rec.label for ch in "\t\n\r,"):
            raise ParseError(
                f"record {rec.id}: label {rec.label!r} may not contain tabs, newlines, or commas",
                path=p,
            )
        lines.append(f"{rec.text}\t{rec.label}")
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if write_manifest:
        entries = [f"language = {collection.language}"]
        if collection.task_instruction:
            entries.append(f"instruction = {collection.task_instruction}")
        entries.append(f"labels = {','.join(collection.label_set)}")
        _manifest_path(p).write_text("\n".join(entries) + "\n", encoding="utf-8")


def _text_key(canonical: bool):
    return canonicalize if canonical else (lambda s: s)


def filter_overlap(
    train: DatasetCollection,
    test: DatasetCollection,
    *,
    canonical: bool = True,
) -> tuple[DatasetCollection, OverlapReport]:
    """Drop train records whose text appears in the test set.

    Texts are compared after canonicalization unless ``canonical=False``
    (byte-exact mode). The rate is normalized by the pre-filter train size;
    the test collection is never modified and surviving records keep their
    original ids.
    """
    key = _text_key(canonical)
    test_texts = {key(rec.text) for rec in test.records}
    removed = tuple(rec.id for rec in train.records if key(rec.text) in test_texts)
    removed_set = set(removed)
    kept = tuple(rec for rec in train.records if rec.id not in removed_set)
    rate = len(removed) / len(train.records) if train.records else 0.0
    normalization = (
        "lowercase, collapse whitespace runs, trim ends" if canonical else "byte-exact"
    ) + "; rate = removed / pre-filter train size"
    report = OverlapReport(removed_ids=removed, overlap_rate=rate, normalization=normalization)
    return replace(train, records=kept), report


def overlap_rate(
    train: DatasetCollection,
    test: DatasetCollection,
    *,
    canonical: bool = True,
) -> float:
    """The rate :func:`filter_overlap` would report, without mutating anything."""
    if not train.records:
        return 0.0
    key = _text_key(canonical)
    test_texts = {key(rec.text) for rec in test.records}
    hits = sum(1 for rec in train.records if key(rec.text) in test_texts)
    return hits / len(train.records)
