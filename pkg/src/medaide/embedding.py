"""Embedding vectors and a deterministic reference embedder.

Real deployments plug in an external embedding model; the reference
embedder here is a hashed bag-of-words stand-in that is fully
deterministic, order-insensitive over the token multiset, and cheap
enough for tests and desk-scale corpora.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import MedaideError

DEFAULT_DIMS = 384
NORM_TOLERANCE = 1e-6

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class ZeroVector(MedaideError):
    pass


class InvalidVector(MedaideError):
    pass


class EmbedderFailure(MedaideError):
    """An external embedder process failed or returned garbage."""


@dataclass(frozen=True)
class EmbeddingVector:
    """Fixed-dimension float32 vector. `normalized` asserts unit L2 norm."""

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float32).ravel()
        object.__setattr__(self, "values", values)
        if values.size == 0:
            raise InvalidVector("embedding must have at least one dimension")
        if not np.all(np.isfinite(values)):
            raise InvalidVector("embedding contains NaN or Inf")
        if self.normalized:
            norm = float(np.linalg.norm(values.astype(np.float64)))
            if abs(norm - 1.0) > NORM_TOLERANCE:
                raise InvalidVector(f"vector flagged normalized but has norm {norm!r}")

    @property
    def dims(self) -> int:
        return int(self.values.size)


class Embedder(Protocol):
    """Anything that maps text to fixed-dimension vectors."""

    dims: int

    def embed(self, text: str) -> EmbeddingVector: ...


def _token_hash(token: str) -> int:
    """Stable 64-bit hash of a token (process- and platform-independent)."""
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def reference_embed(text: str, dims: int = DEFAULT_DIMS) -> EmbeddingVector:
    """Hashed bag-of-words embedding.

    Lowercases, splits on non-alphanumerics, and for each token adds +1 or -1
    (chosen by the hash's top bit) at index ``hash % dims``, then
    L2-normalizes. Text with no tokens yields the zero vector with
    ``normalized=False``.
    """
    acc = np.zeros(dims, dtype=np.float64)
    for token in _TOKEN_RE.findall(text.lower()):
        h = _token_hash(token)
        sign = -1.0 if h >> 63 else 1.0
        acc[h % dims] += sign
    norm = float(np.linalg.norm(acc))
    if norm == 0.0:
        return EmbeddingVector(values=acc.astype(np.float32), normalized=False)
    return EmbeddingVector(values=(acc / norm).astype(np.float32), normalized=True)


class ReferenceEmbedder:
    """Embedder-protocol wrapper around reference_embed."""

    name = "reference"

    def __init__(self, dims: int = DEFAULT_DIMS):
        if dims < 1:
            raise InvalidVector(f"dims must be >= 1, got {dims}")
        self.dims = dims

    def embed(self, text: str) -> EmbeddingVector:
        return reference_embed(text, dims=self.dims)


def embed_batch(texts: list[str], embedder: Embedder) -> list[EmbeddingVector]:
    """Embed texts in order; every output has embedder.dims dimensions."""
    out: list[EmbeddingVector] = []
    for text in texts:
        try:
            vec = embedder.embed(text)
        except MedaideError:
            raise
        except Exception as exc:
            raise EmbedderFailure(f"embedder {getattr(embedder, 'name', embedder)!r} failed: {exc}") from exc
        if vec.dims != embedder.dims:
            raise EmbedderFailure(
                f"embedder returned {vec.dims} dims, expected {embedder.dims}"
            )
        out.append(vec)
    return out


def normalize(v: EmbeddingVector) -> EmbeddingVector:
    """Scale to unit L2 norm. Raises ZeroVector on an all-zero input."""
    values = v.values.astype(np.float64)
    norm = float(np.linalg.norm(values))
    if norm == 0.0:
        raise ZeroVector("cannot normalize the zero vector")
    return EmbeddingVector(values=(values / norm).astype(np.float32), normalized=True)


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine of the angle between two vectors; 0.0 if either is zero."""
    av = a.values.astype(np.float64)
    bv = b.values.astype(np.float64)
    na = float(np.linalg.norm(av))
    nb = float(np.linalg.norm(bv))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(av, bv) / (na * nb))
