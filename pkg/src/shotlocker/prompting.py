"""Prompt rendering: instruction, then shot blocks, then the query.

Templates are deliberately dumb string formats. The default layout is

    <instruction>\\n\\n<shot text>\\n<shot label>\\n\\n...\\n\\n<query text>\\n

and the shot label placeholder receives the verbalized label, so the
strings a scorer is asked to continue with also appear verbatim in the
context.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import DatasetRecord
from .errors import ConfigError, LeakageError, UnknownRecordError, VerbalizerError
from .kvfile import read_kv, unescape
from .retrieval import ShotSet

SHOT_ORDERS = ("by_label_then_distance_asc", "by_distance_asc_global", "shuffled")

_PLACEHOLDER = re.compile(r"\{(text|label)\}")


def _render(fmt: str, **values: str) -> str:
    # Single-pass substitution: placeholder-like content inside the values
    # is never rescanned.
    return _PLACEHOLDER.sub(lambda match: values[match.group(1)], fmt)


@dataclass(frozen=True)
class PromptTemplate:
    shot_format: str = "{text}\n{label}"
    query_format: str = "{text}\n"
    separator: str = "\n\n"
    shot_order: str = "by_label_then_distance_asc"
    shuffle_seed: int = 0
    template_id: str = "default"

    def __post_init__(self) -> None:
        if self.shot_format.count("{text}") != 1 or self.shot_format.count("{label}") != 1:
            raise ConfigError("shot_format must contain {text} and {label} exactly once")
        if self.query_format.count("{text}") != 1:
            raise ConfigError("query_format must contain {text} exactly once")
        if "{label}" in self.query_format:
            raise ConfigError("query_format must not contain {label}")
        if self.shot_order not in SHOT_ORDERS:
            raise ConfigError(f"unknown shot_order {self.shot_order!r}; expected one of {SHOT_ORDERS}")


DEFAULT_TEMPLATE = PromptTemplate()


@dataclass(frozen=True)
class Prompt:
    text: str
    shot_ids: tuple[int, ...]
    template_id: str
    instruction: str
    query_id: int


def verbalize_label(label: str, mapping: Mapping[str, str]) -> str:
    """The surface string a scorer is asked to continue with."""
    try:
        return mapping[label]
    except KeyError:
        raise VerbalizerError(f"no verbalization for label {label!r}") from None


def identity_label_map(labels: Iterable[str]) -> dict[str, str]:
    return {label: label for label in labels}


def _ordered_shots(shots: ShotSet, template: PromptTemplate) -> list[tuple[str, int, float]]:
    flat = list(shots.iter_shots())
    if template.shot_order == "by_label_then_distance_asc":
        return flat
    if template.shot_order == "by_distance_asc_global":
        return sorted(flat, key=lambda item: (item[2], item[1]))
    shuffled = list(flat)
    random.Random(template.shuffle_seed).shuffle(shuffled)
    return shuffled


def build_prompt(
    instruction: str,
    shots: ShotSet,
    query: DatasetRecord,
    template: PromptTemplate,
    records: Mapping[int, DatasetRecord],
    *,
    verbalizer: Mapping[str, str] | None = None,
) -> Prompt:
    """Render instruction + shot blocks + query and record the shot order.

    The query must not appear among the shots; that is a hard error because
    overlap filtering exists precisely to rule it out. Train and test carry
    separate id spaces, so identity means matching id *and* text, not a bare
    id collision.
    """
    ordered = _ordered_shots(shots, template)
    blocks: list[str] = []
    shot_ids: list[int] = []
    for label, rid, _ in ordered:
        rec = records.get(rid)
        if rec is None:
            raise UnknownRecordError(f"shot id {rid} is not resolvable")
        if rid == query.id and rec.text == query.text:
            raise LeakageError(f"query id {query.id} appears in its own shot set")
        surface = verbalize_label(label, verbalizer) if verbalizer is not None else label
        blocks.append(_render(template.shot_format, text=rec.text, label=surface))
        shot_ids.append(rid)
    parts = [instruction] if instruction else []
    parts.extend(blocks)
    parts.append(_render(template.query_format, text=query.text))
    return Prompt(
        text=template.separator.join(parts),
        shot_ids=tuple(shot_ids),
        template_id=template.template_id,
        instruction=instruction,
        query_id=query.id,
    )


def load_template(path: str | Path, template_id: str | None = None) -> PromptTemplate:
    """Read a template from a key-value file.

    Required keys: ``shot_format``, ``query_format``, ``separator``,
    ``shot_order``. Optional: ``shuffle_seed``, ``id``. String fields go
    through escape expansion, so separators are written like ``\\n\\n``.
    """
    kv = read_kv(path)
    missing = [key for key in ("shot_format", "query_format", "separator", "shot_order") if key not in kv]
    if missing:
        raise ConfigError(f"template {path} is missing keys: {missing}")
    return PromptTemplate(
        shot_format=unescape(kv["shot_format"]),
        query_format=unescape(kv["query_format"]),
        separator=unescape(kv["separator"]),
        shot_order=kv["shot_order"],
        shuffle_seed=int(kv.get("shuffle_seed", "0")),
        template_id=template_id or kv.get("id", Path(path).stem),
    )


def resolve_template(id_or_path: str) -> PromptTemplate:
    """``default`` names the built-in template; anything else is a file path."""
    if id_or_path == "default":
        return DEFAULT_TEMPLATE
    if Path(id_or_path).exists():
        return load_template(id_or_path)
    raise ConfigError(f"unknown template {id_or_path!r} (not 'default' and not a file)")
