"""Reader for the tab-separated record line format (``text<TAB>label``,
one record per line, UTF-8). Ids follow line order from 0, matching the
row order of the exported embedding file."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class Record:
    id: int
    text: str
    label: str


def read_records(path: str | Path) -> list[Record]:
    p = Path(path)
    records: list[Record] = []
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        if "\t" not in line:
            raise ValueError(f"{p}:{lineno}: no tab separator in {line!r}")
        text, _, label = line.rpartition("\t")
        if not text.strip():
            raise ValueError(f"{p}:{lineno}: blank text field")
        label = label.strip()
        if not label:
            raise ValueError(f"{p}:{lineno}: blank label field")
        records.append(Record(id=lineno - 1, text=text, label=label))
    if not records:
        raise ValueError(f"{p} contains no records")
    return records
