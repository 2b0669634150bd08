"""Ranking training examples against a query embedding and selecting shot
sets under the random / nearest / farthest / interval strategies, plus the
kNN baseline classifier.

Search is exact and exhaustive; ties are broken by ascending record id so
results are independent of index row order. Seeded draws use a generator
derived from ``(seed, label index)`` so each label group is independently
reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ConfigError,
    EmptyInputError,
    InsufficientCandidatesError,
    InsufficientWindowError,
    UnknownRecordError,
)
from .geometry import EmbeddingMatrix, Measure, Standardizer, measure_distances

STRATEGIES = ("random", "nearest", "farthest", "interval")

Entry = tuple[int, float]

# Snap tolerance for percentile window bounds: keeps windows pinned to exact
# rational intents (e.g. width = k/n) despite float dust in p*n products.
_BOUND_EPS = 1e-9


def _entry_key(entry: Entry) -> tuple[float, int]:
    return (entry[1], entry[0])


def _selection_rng(seed: int, group_index: int) -> np.random.Generator:
    if seed < 0:
        raise ConfigError(f"selection seeds must be non-negative, got {seed}")
    return np.random.default_rng([seed, group_index])


def _require_seed(seed: int | None) -> int:
    if seed is None:
        raise ConfigError("this strategy needs a seed")
    return int(seed)


@dataclass(frozen=True)
class RankedList:
    """Every indexed record exactly once, ascending by (distance, id)."""

    entries: tuple[Entry, ...]
    query_id: int
    measure: Measure
    labels: Mapping[int, str]
    label_order: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "label_order", tuple(self.label_order))
        known = set(self.label_order)
        previous: Entry | None = None
        seen: set[int] = set()
        for entry in self.entries:
            if previous is not None and _entry_key(entry) < _entry_key(previous):
                raise ValueError("entries are not sorted ascending by (distance, id)")
            previous = entry
            rid = entry[0]
            if rid in seen:
                raise ValueError(f"record id {rid} appears twice")
            seen.add(rid)
            label = self.labels.get(rid)
            if label is None:
                raise UnknownRecordError(f"no label for record id {rid}")
            if label not in known:
                raise ConfigError(f"label {label!r} is outside the declared label order")

    def __len__(self) -> int:
        return len(self.entries)

    @cached_property
    def per_label(self) -> dict[str, tuple[Entry, ...]]:
        groups: dict[str, list[Entry]] = {label: [] for label in self.label_order}
        for rid, d in self.entries:
            groups[self.labels[rid]].append((rid, d))
        return {label: tuple(v) for label, v in groups.items()}

    def candidates_for(self, label: str) -> tuple[Entry, ...]:
        try:
            return self.per_label[label]
        except KeyError:
            raise ConfigError(f"label {label!r} is not in the declared label order") from None


@dataclass(frozen=True)
class IntervalSpec:
    """Percentile rank window: lower edge ``p``, extent ``width``."""

    p: float
    width: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"p must lie in [0, 1], got {self.p}")
        if not 0.0 < self.width <= 1.0:
            raise ConfigError(f"width must lie in (0, 1], got {self.width}")
        if self.p + self.width > 1.0 + _BOUND_EPS:
            raise ConfigError(f"p + width must not exceed 1, got {self.p + self.width}")


@dataclass(frozen=True)
class ShotSet:
    """Selected shots grouped per label, each group ascending by distance.

    Stratified sets hold exactly ``k`` entries per label. Non-stratified
    sets (the global ablation mode) group a global selection by label, so
    group sizes vary.
    """

    groups: Mapping[str, tuple[Entry, ...]]
    k: int
    strategy: str
    stratified: bool = True

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        frozen = {label: tuple(entries) for label, entries in self.groups.items()}
        object.__setattr__(self, "groups", frozen)
        seen: set[int] = set()
        for label, entries in frozen.items():
            if self.stratified and len(entries) != self.k:
                raise ValueError(
                    f"label {label!r} holds {len(entries)} shots, expected exactly k={self.k}"
                )
            if list(entries) != sorted(entries, key=_entry_key):
                raise ValueError(f"group {label!r} is not sorted ascending by distance")
            for rid, _ in entries:
                if rid in seen:
                    raise ValueError(f"record id {rid} appears more than once in the shot set")
                seen.add(rid)

    @property
    def shot_count(self) -> int:
        return sum(len(entries) for entries in self.groups.values())

    def shot_ids(self) -> tuple[int, ...]:
        return tuple(rid for entries in self.groups.values() for rid, _ in entries)

    def iter_shots(self):
        """Yield (label, record id, distance) in label-group order."""
        for label, entries in self.groups.items():
            for rid, d in entries:
                yield label, rid, d


def rank(
    query,
    index: EmbeddingMatrix,
    labels: Mapping[int, str],
    m: Measure,
    s: Standardizer | None = None,
    *,
    label_order: Sequence[str] | None = None,
    query_id: int = -1,
) -> RankedList:
    """Exact exhaustive ranking of every index row, ascending by distance,
    ties broken by ascending record id."""
    if len(index) == 0:
        raise EmptyInputError("cannot rank an empty index")
    id_list = [int(i) for i in index.ids]
    missing = [i for i in id_list if i not in labels]
    if missing:
        raise UnknownRecordError(f"no label for record ids {missing[:5]}")
    distances = measure_distances(m, s, query, index.vectors)
    order = np.lexsort((index.ids, distances))
    entries = tuple((int(index.ids[i]), float(distances[i])) for i in order)
    present = {labels[i] for i in id_list}
    if label_order is None:
        label_order = tuple(sorted(present))
    else:
        label_order = tuple(label_order)
        stray = present - set(label_order)
        if stray:
            raise ConfigError(f"index contains labels outside the declared order: {sorted(stray)}")
    return RankedList(
        entries=entries,
        query_id=query_id,
        measure=m,
        labels=dict(labels),
        label_order=label_order,
    )


def _check_k(k: int) -> None:
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")


def nearest_per_label(ranked: RankedList, k: int) -> ShotSet:
    """For each label, the k smallest-distance candidates, ascending."""
    _check_k(k)
    groups: dict[str, tuple[Entry, ...]] = {}
    for label in ranked.label_order:
        cands = ranked.candidates_for(label)
        if len(cands) < k:
            raise InsufficientCandidatesError(
                f"label {label!r} has {len(cands)} candidates, need k={k}"
            )
        groups[label] = tuple(cands[:k])
    return ShotSet(groups=groups, k=k, strategy="nearest")


def farthest_per_label(ranked: RankedList, k: int) -> ShotSet:
    """For each label, the k largest-distance candidates (stored ascending)."""
    _check_k(k)
    groups: dict[str, tuple[Entry, ...]] = {}
    for label in ranked.label_order:
        cands = ranked.candidates_for(label)
        if len(cands) < k:
            raise InsufficientCandidatesError(
                f"label {label!r} has {len(cands)} candidates, need k={k}"
            )
        groups[label] = tuple(cands[len(cands) - k:])
    return ShotSet(groups=groups, k=k, strategy="farthest")


def random_per_label(ranked: RankedList, k: int, seed: int) -> ShotSet:
    """k uniform draws without replacement per label."""
    _check_k(k)
    groups: dict[str, tuple[Entry, ...]] = {}
    for j, label in enumerate(ranked.label_order):
        cands = ranked.candidates_for(label)
        if len(cands) < k:
            raise InsufficientCandidatesError(
                f"label {label!r} has {len(cands)} candidates, need k={k}"
            )
        rng = _selection_rng(seed, j)
        picks = rng.choice(len(cands), size=k, replace=False)
        groups[label] = tuple(sorted((cands[i] for i in picks), key=_entry_key))
    return ShotSet(groups=groups, k=k, strategy="random")


def _window_bounds(spec: IntervalSpec, n: int) -> tuple[int, int]:
    lo = math.floor(spec.p * n + _BOUND_EPS)
    hi = math.ceil((spec.p + spec.width) * n - _BOUND_EPS)
    return max(0, lo), min(hi, n)


def interval_sample(ranked: RankedList, spec: IntervalSpec, k: int, seed: int) -> ShotSet:
    """k seeded draws per label from the rank window
    [floor(p*n), ceil((p+width)*n)) over that label's candidates.

    With p=0 and width=k/n the window pins the top-k, so the result equals
    :func:`nearest_per_label` regardless of seed.
    """
    _check_k(k)
    groups: dict[str, tuple[Entry, ...]] = {}
    for j, label in enumerate(ranked.label_order):
        cands = ranked.candidates_for(label)
        lo, hi = _window_bounds(spec, len(cands))
        window = cands[lo:hi]
        if len(window) < k:
            raise InsufficientWindowError(
                f"label {label!r}: window [{lo}, {hi}) holds {len(window)} candidates, need k={k}"
            )
        rng = _selection_rng(seed, j)
        picks = rng.choice(len(window), size=k, replace=False)
        groups[label] = tuple(sorted((window[i] for i in picks), key=_entry_key))
    return ShotSet(groups=groups, k=k, strategy="interval")


def select_shots(
    ranked: RankedList,
    strategy: str,
    k: int,
    *,
    seed: int | None = None,
    spec: IntervalSpec | None = None,
    stratified: bool = True,
) -> ShotSet:
    """Strategy dispatch.

    ``stratified=False`` is the global ablation mode: it selects
    k * |label_order| shots from the whole candidate pool instead of k per
    label, then groups them by their actual labels.
    """
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    if stratified:
        if strategy == "nearest":
            return nearest_per_label(ranked, k)
        if strategy == "farthest":
            return farthest_per_label(ranked, k)
        if strategy == "random":
            return random_per_label(ranked, k, _require_seed(seed))
        if spec is None:
            raise ConfigError("interval strategy needs an IntervalSpec")
        return interval_sample(ranked, spec, k, _require_seed(seed))
    return _select_global(ranked, strategy, k, seed=seed, spec=spec)


def _select_global(
    ranked: RankedList,
    strategy: str,
    k: int,
    *,
    seed: int | None,
    spec: IntervalSpec | None,
) -> ShotSet:
    _check_k(k)
    total = k * len(ranked.label_order)
    cands = ranked.entries
    if strategy == "nearest" or strategy == "farthest":
        if len(cands) < total:
            raise InsufficientCandidatesError(
                f"index holds {len(cands)} candidates, need {total}"
            )
        chosen = cands[:total] if strategy == "nearest" else cands[len(cands) - total:]
    elif strategy == "random":
        if len(cands) < total:
            raise InsufficientCandidatesError(
                f"index holds {len(cands)} candidates, need {total}"
            )
        rng = _selection_rng(_require_seed(seed), 0)
        picks = rng.choice(len(cands), size=total, replace=False)
        chosen = tuple(cands[i] for i in picks)
    else:
        if spec is None:
            raise ConfigError("interval strategy needs an IntervalSpec")
        lo, hi = _window_bounds(spec, len(cands))
        window = cands[lo:hi]
        if len(window) < total:
            raise InsufficientWindowError(
                f"window [{lo}, {hi}) holds {len(window)} candidates, need {total}"
            )
        rng = _selection_rng(_require_seed(seed), 0)
        picks = rng.choice(len(window), size=total, replace=False)
        chosen = tuple(window[i] for i in picks)
    grouped: dict[str, list[Entry]] = {label: [] for label in ranked.label_order}
    for rid, d in chosen:
        grouped[ranked.labels[rid]].append((rid, d))
    groups = {
        label: tuple(sorted(entries, key=_entry_key))
        for label, entries in grouped.items()
        if entries
    }
    return ShotSet(groups=groups, k=k, strategy=strategy, stratified=False)


def knn_classify(
    query,
    index: EmbeddingMatrix,
    labels: Mapping[int, str],
    m: Measure,
    k: int,
    *,
    s: Standardizer | None = None,
    label_order: Sequence[str] | None = None,
) -> str:
    """Majority label among the k globally nearest rows.

    Ties break by the smallest summed distance among tied labels, then by
    position in the declared label order.
    """
    _check_k(k)
    if k > len(index):
        raise InsufficientCandidatesError(f"k={k} exceeds the index size {len(index)}")
    ranked = rank(query, index, labels, m, s, label_order=label_order)
    votes: dict[str, int] = {}
    dsum: dict[str, float] = {}
    for rid, d in ranked.entries[:k]:
        label = ranked.labels[rid]
        votes[label] = votes.get(label, 0) + 1
        dsum[label] = dsum.get(label, 0.0) + d
    position = {label: i for i, label in enumerate(ranked.label_order)}
    return min(votes, key=lambda label: (-votes[label], dsum[label], position[label]))
