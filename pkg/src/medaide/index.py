"""Exact flat vector index with deterministic top-k search.

Scores are computed in 64-bit floats regardless of the 32-bit storage
dtype, and ties are always broken by ascending id, so results are
reproducible and directly comparable with the brute-force oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import MedaideError

ROW_NORM_TOLERANCE = 1e-5


class Metric(Enum):
    L2 = "l2"
    COSINE = "cosine"


class Scheme(Enum):
    FLAT = "flat"
    Q8 = "q8"
    Q4 = "q4"


class DimMismatch(MedaideError):
    pass


class DuplicateId(MedaideError):
    pass


class UnnormalizedForCosine(MedaideError):
    pass


class EmptyInput(MedaideError):
    pass


@dataclass(frozen=True)
class SearchHit:
    """One search result. Score is a distance for L2, a similarity for cosine."""

    id: str
    score: float
    rank: int


@dataclass
class FlatIndex:
    dims: int
    metric: Metric
    ids: list[str]
    vectors: np.ndarray  # (count, dims) float32, row-major

    @property
    def count(self) -> int:
        return len(self.ids)


def _as_matrix(vectors, dims: int | None) -> np.ndarray:
    mat = np.asarray(vectors, dtype=np.float32)
    if mat.size == 0:
        if dims is None:
            if mat.ndim == 2 and mat.shape[1] > 0:
                dims = int(mat.shape[1])
            else:
                raise DimMismatch("dims required to build an empty index")
        return mat.reshape(0, dims)
    if mat.ndim == 1:
        mat = mat.reshape(1, -1)
    if mat.ndim != 2:
        raise DimMismatch(f"expected a 2-D vector matrix, got ndim={mat.ndim}")
    if dims is not None and mat.shape[1] != dims:
        raise DimMismatch(f"vectors have {mat.shape[1]} dims, expected {dims}")
    return mat


def build_flat(
    ids: Sequence[str],
    vectors,
    metric: Metric = Metric.COSINE,
    dims: int | None = None,
) -> FlatIndex:
    """Build an exact index over float32 rows, preserving insertion order.

    Cosine indexes require unit-norm rows; rows outside tolerance are
    rejected rather than silently renormalized.
    """
    ids = [str(i) for i in ids]
    mat = _as_matrix(vectors, dims)
    if len(ids) != mat.shape[0]:
        raise DimMismatch(f"{len(ids)} ids for {mat.shape[0]} vectors")
    if len(set(ids)) != len(ids):
        seen: set[str] = set()
        for i in ids:
            if i in seen:
                raise DuplicateId(f"duplicate id {i!r}")
            seen.add(i)
    if not np.all(np.isfinite(mat)):
        raise MedaideError("vectors contain NaN or Inf")
    if metric is Metric.COSINE and mat.shape[0] > 0:
        norms = np.linalg.norm(mat.astype(np.float64), axis=1)
        bad = np.nonzero(np.abs(norms - 1.0) > ROW_NORM_TOLERANCE)[0]
        if bad.size > 0:
            raise UnnormalizedForCosine(
                f"row {bad[0]} has norm {norms[bad[0]]:.6f}; cosine requires unit rows"
            )
    return FlatIndex(dims=int(mat.shape[1]), metric=metric, ids=ids, vectors=mat)


def _check_query(query, dims: int) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64).ravel()
    if q.size != dims:
        raise DimMismatch(f"query has {q.size} dims, index has {dims}")
    return q


def rank_hits(ids: Sequence[str], scores: np.ndarray, metric: Metric, k: int) -> list[SearchHit]:
    """Sort scored candidates best-first with ties broken by ascending id."""
    if metric is Metric.L2:
        order = sorted(range(len(ids)), key=lambda i: (scores[i], ids[i]))
    else:
        order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))
    return [SearchHit(id=ids[i], score=float(scores[i]), rank=r) for r, i in enumerate(order[:k])]


def score_matrix(matrix64: np.ndarray, query64: np.ndarray, metric: Metric) -> np.ndarray:
    """Vectorized scores of a float64 row matrix against one query."""
    if metric is Metric.L2:
        diff = matrix64 - query64
        return np.sqrt(np.sum(diff * diff, axis=1))
    return matrix64 @ query64


def search(index: FlatIndex, query, k: int = 2) -> list[SearchHit]:
    """Exact top-k over the flat index. k defaults to 2 neighbors."""
    if k < 1:
        raise MedaideError(f"k must be >= 1, got {k}")
    q = _check_query(query, index.dims)
    if index.count == 0:
        return []
    scores = score_matrix(index.vectors.astype(np.float64), q, index.metric)
    return rank_hits(index.ids, scores, index.metric, k)


def brute_force_oracle(
    ids: Sequence[str],
    vectors,
    query,
    metric: Metric,
    k: int = 2,
) -> list[SearchHit]:
    """Row-by-row reference scan, independent of the vectorized search path.

    Accumulates in float64 and applies the same best-first, ascending-id
    ordering as search().
    """
    ids = [str(i) for i in ids]
    mat = np.asarray(vectors, dtype=np.float64)
    if mat.size == 0:
        return []
    if mat.ndim == 1:
        mat = mat.reshape(1, -1)
    q = _check_query(query, mat.shape[1])
    scores = np.empty(mat.shape[0], dtype=np.float64)
    for i in range(mat.shape[0]):
        row = mat[i]
        if metric is Metric.L2:
            diff = row - q
            scores[i] = np.sqrt(float(np.dot(diff, diff)))
        else:
            scores[i] = float(np.dot(row, q))
    return rank_hits(ids, scores, metric, k)
