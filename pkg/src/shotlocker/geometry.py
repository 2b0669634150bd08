"""Vector math over embeddings: pooling, distances, normalization, and
per-dimension standardization.

All operations are pure functions over immutable inputs; cosine is exposed
as a distance (1 - similarity) so retrieval code minimizes uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import (
    ConfigError,
    DegenerateVectorError,
    DimensionMismatchError,
    EmptyInputError,
    GeometryError,
    InsufficientDataError,
    UnknownRecordError,
)

MEASURE_KINDS = ("euclidean", "cosine")

DEFAULT_EPSILON = 1e-8


def _as_vector(values, *, name: str = "vector") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"{name} contains non-finite entries")
    return arr


def _as_matrix(values, *, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"{name} contains non-finite entries")
    return arr


def _check_same_dim(u: np.ndarray, v: np.ndarray) -> None:
    if u.shape[-1] != v.shape[-1]:
        raise DimensionMismatchError(f"dimension mismatch: {u.shape[-1]} vs {v.shape[-1]}")


@dataclass(frozen=True)
class EmbeddingMatrix:
    """N embedding rows aligned 1:1 with record ids."""

    vectors: np.ndarray
    ids: np.ndarray

    def __post_init__(self) -> None:
        vectors = _as_matrix(self.vectors, name="vectors").copy()
        ids = np.asarray(self.ids, dtype=np.int64).copy()
        if ids.ndim != 1 or ids.shape[0] != vectors.shape[0]:
            raise DimensionMismatchError(
                f"ids shape {ids.shape} does not align with {vectors.shape[0]} rows"
            )
        if len(np.unique(ids)) != ids.shape[0]:
            raise ValueError("record ids are not unique")
        vectors.setflags(write=False)
        ids.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "_row_of", {int(i): idx for idx, i in enumerate(ids)})

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def row(self, record_id: int) -> np.ndarray:
        try:
            return self.vectors[self._row_of[int(record_id)]]
        except KeyError:
            raise UnknownRecordError(f"no embedding row for record id {record_id}") from None

    def subset(self, record_ids: Iterable[int]) -> "EmbeddingMatrix":
        """Rows for the given ids, in the given order."""
        wanted = [int(i) for i in record_ids]
        try:
            rows = [self._row_of[i] for i in wanted]
        except KeyError as err:
            raise UnknownRecordError(f"no embedding row for record id {err.args[0]}") from None
        return EmbeddingMatrix(
            vectors=self.vectors[rows].reshape(len(rows), self.dim),
            ids=np.asarray(wanted, dtype=np.int64),
        )


@dataclass(frozen=True)
class Measure:
    """A distance configuration: metric kind plus pre-transform flags.

    ``measure_distance`` applies standardize, then normalize, then the kind.
    """

    kind: str
    normalize_first: bool = False
    standardize_first: bool = False

    def __post_init__(self) -> None:
        if self.kind not in MEASURE_KINDS:
            raise ConfigError(f"unknown measure kind {self.kind!r}; expected one of {MEASURE_KINDS}")

    def describe(self) -> str:
        flags = [self.kind]
        if self.standardize_first:
            flags.append("standardized")
        if self.normalize_first:
            flags.append("normalized")
        return "+".join(flags)


@dataclass(frozen=True)
class Standardizer:
    """Per-dimension affine correction, fitted on training rows only."""

    mean: np.ndarray
    std: np.ndarray
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        mean = _as_vector(self.mean, name="mean").copy()
        std = _as_vector(self.std, name="std").copy()
        if mean.shape != std.shape:
            raise DimensionMismatchError(f"mean shape {mean.shape} != std shape {std.shape}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if np.any(std < self.epsilon):
            raise ValueError("std entries must be floored at epsilon")
        mean.setflags(write=False)
        std.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])


def mean_pool(token_vectors) -> np.ndarray:
    """Component-wise arithmetic mean of the rows of a T x D matrix."""
    arr = _as_matrix(token_vectors, name="token_vectors")
    if arr.shape[0] == 0:
        raise EmptyInputError("cannot pool zero token vectors")
    return arr.mean(axis=0)


def euclidean_distance(u, v) -> float:
    u = _as_vector(u, name="u")
    v = _as_vector(v, name="v")
    _check_same_dim(u, v)
    return float(np.sqrt(np.sum((u - v) ** 2)))


def cosine_distance(u, v) -> float:
    """1 - cos(u, v), clipped to [0, 2]."""
    u = _as_vector(u, name="u")
    v = _as_vector(v, name="v")
    _check_same_dim(u, v)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise DegenerateVectorError("cosine distance is undefined for zero vectors")
    d = 1.0 - float(np.dot(u, v)) / (nu * nv)
    return min(2.0, max(0.0, d))


def l2_normalize(v) -> np.ndarray:
    v = _as_vector(v, name="v")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise DegenerateVectorError("cannot normalize a zero vector")
    return v / norm


def fit_standardizer(train: EmbeddingMatrix, epsilon: float = DEFAULT_EPSILON) -> Standardizer:
    """Per-dimension sample mean and standard deviation (ddof=1) over train
    rows; std entries below ``epsilon`` are floored rather than rejected so
    constant dimensions stay usable."""
    if len(train) < 2:
        raise InsufficientDataError(f"need at least 2 rows to fit a standardizer, got {len(train)}")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    mean = train.vectors.mean(axis=0)
    std = train.vectors.std(axis=0, ddof=1)
    return Standardizer(mean=mean, std=np.maximum(std, epsilon), epsilon=epsilon)


def apply_standardizer(s: Standardizer, v) -> np.ndarray:
    """(v - mean) / std, component-wise; accepts a vector or matrix rows."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape[-1] != s.dim:
        raise DimensionMismatchError(f"dimension mismatch: {arr.shape[-1]} vs {s.dim}")
    return (arr - s.mean) / s.std


def measure_distance(m: Measure, s: Standardizer | None, u, v) -> float:
    """Distance between two vectors under ``m``.

    Transform order is fixed: standardize, then normalize, then the metric
    (standardization is an affine map defined on raw coordinates).
    """
    u = _as_vector(u, name="u")
    v = _as_vector(v, name="v")
    _check_same_dim(u, v)
    if m.standardize_first:
        if s is None:
            raise ConfigError("measure requires a standardizer but none was given")
        u = apply_standardizer(s, u)
        v = apply_standardizer(s, v)
    if m.normalize_first:
        u = l2_normalize(u)
        v = l2_normalize(v)
    if m.kind == "euclidean":
        return euclidean_distance(u, v)
    return cosine_distance(u, v)


def measure_distances(m: Measure, s: Standardizer | None, query, matrix) -> np.ndarray:
    """Vectorized distances from one query to every row of a matrix, with
    the same semantics as :func:`measure_distance`."""
    q = _as_vector(query, name="query")
    rows = _as_matrix(matrix, name="matrix")
    _check_same_dim(q, rows)
    if m.standardize_first:
        if s is None:
            raise ConfigError("measure requires a standardizer but none was given")
        q = apply_standardizer(s, q)
        rows = apply_standardizer(s, rows)
    if m.normalize_first:
        q = l2_normalize(q)
        norms = np.linalg.norm(rows, axis=1)
        if np.any(norms == 0.0):
            raise DegenerateVectorError("matrix contains a zero row")
        rows = rows / norms[:, None]
    if m.kind == "euclidean":
        return np.sqrt(np.sum((rows - q) ** 2, axis=1))
    qn = float(np.linalg.norm(q))
    norms = np.linalg.norm(rows, axis=1)
    if qn == 0.0 or np.any(norms == 0.0):
        raise DegenerateVectorError("cosine distance is undefined for zero vectors")
    return np.clip(1.0 - (rows @ q) / (norms * qn), 0.0, 2.0)
