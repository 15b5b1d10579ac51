"""Scalar quantization of embedding storage (Q8 and Q4).

Each dimension gets an affine code: code = round((x - offset) / scale)
clamped to the level range, with the clip range chosen per dimension from
value quantiles so outliers do not blow up the step size. Q4 packs two
codes per byte, low nibble first. Search against a quantized index is
asymmetric: the full-precision query is scored against decoded codes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .index import (
    EmptyInput,
    FlatIndex,
    Metric,
    Scheme,
    SearchHit,
    _check_query,
    rank_hits,
    score_matrix,
)

DEFAULT_CLIP_QUANTILE = 0.999

LEVELS = {Scheme.Q8: 255, Scheme.Q4: 15}


@dataclass(frozen=True)
class Calibration:
    """Per-dimension affine code parameters and the clip range behind them."""

    offset: np.ndarray  # float32 (dims,), equals the lower clip bound
    scale: np.ndarray  # float32 (dims,), > 0
    lower: np.ndarray
    upper: np.ndarray
    levels: int


@dataclass
class QuantizedIndex:
    scheme: Scheme
    dims: int
    metric: Metric
    ids: list[str]
    offset: np.ndarray  # float32 (dims,)
    scale: np.ndarray  # float32 (dims,)
    codes: np.ndarray  # uint8 (count, dims) for Q8, (count, ceil(dims/2)) for Q4

    @property
    def count(self) -> int:
        return len(self.ids)

    @property
    def levels(self) -> int:
        return LEVELS[self.scheme]

    @property
    def code_bytes(self) -> int:
        return int(self.codes.nbytes)


def calibrate(vectors, clip_quantile: float = DEFAULT_CLIP_QUANTILE, scheme: Scheme = Scheme.Q8) -> Calibration:
    """Choose per-dimension clip bounds and code step from column quantiles.

    The clip range of dimension d is [quantile(1 - q), quantile(q)] over the
    column's values; q = 1.0 means exact min/max. Degenerate columns
    (upper == lower) get scale 1 so every value codes to 0.
    """
    if not 0.5 < clip_quantile <= 1.0:
        raise ValueError(f"clip_quantile must be in (0.5, 1], got {clip_quantile}")
    if scheme not in LEVELS:
        raise ValueError(f"scheme must be Q8 or Q4, got {scheme}")
    mat = np.asarray(vectors, dtype=np.float64)
    if mat.ndim == 1:
        mat = mat.reshape(1, -1)
    if mat.size == 0:
        raise EmptyInput("cannot calibrate on zero vectors")
    levels = LEVELS[scheme]
    lower = np.quantile(mat, 1.0 - clip_quantile, axis=0)
    upper = np.quantile(mat, clip_quantile, axis=0)
    scale = (upper - lower) / levels
    scale = np.where(upper == lower, 1.0, scale)
    return Calibration(
        offset=lower.astype(np.float32),
        scale=scale.astype(np.float32),
        lower=lower.astype(np.float32),
        upper=upper.astype(np.float32),
        levels=levels,
    )


def encode(vectors, calib: Calibration) -> np.ndarray:
    """Unpacked uint8 codes, one per coordinate."""
    mat = np.asarray(vectors, dtype=np.float64)
    if mat.ndim == 1:
        mat = mat.reshape(1, -1)
    t = (mat - calib.offset.astype(np.float64)) / calib.scale.astype(np.float64)
    degenerate = calib.upper == calib.lower
    if np.any(degenerate):
        t[:, degenerate] = 0.0
    return np.clip(np.rint(t), 0, calib.levels).astype(np.uint8)


def decode(codes: np.ndarray, offset: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Reconstruct float64 vectors from unpacked codes."""
    return offset.astype(np.float64) + codes.astype(np.float64) * scale.astype(np.float64)


def pack_nibbles(codes: np.ndarray) -> np.ndarray:
    """Pack 4-bit codes two per byte; even dimensions go in the low nibble."""
    count, dims = codes.shape
    if dims % 2 == 1:
        codes = np.concatenate([codes, np.zeros((count, 1), dtype=np.uint8)], axis=1)
    low = codes[:, 0::2]
    high = codes[:, 1::2]
    return (low | (high << 4)).astype(np.uint8)


def unpack_nibbles(packed: np.ndarray, dims: int) -> np.ndarray:
    count = packed.shape[0]
    out = np.empty((count, packed.shape[1] * 2), dtype=np.uint8)
    out[:, 0::2] = packed & 0x0F
    out[:, 1::2] = packed >> 4
    return out[:, :dims]


def quantize_index(
    flat: FlatIndex,
    scheme: Scheme = Scheme.Q8,
    clip_quantile: float = DEFAULT_CLIP_QUANTILE,
) -> QuantizedIndex:
    """Quantize a flat index, preserving ids and metric."""
    if flat.count == 0:
        raise EmptyInput("cannot quantize an empty index")
    calib = calibrate(flat.vectors, clip_quantile=clip_quantile, scheme=scheme)
    codes = encode(flat.vectors, calib)
    if scheme is Scheme.Q4:
        codes = pack_nibbles(codes)
    return QuantizedIndex(
        scheme=scheme,
        dims=flat.dims,
        metric=flat.metric,
        ids=list(flat.ids),
        offset=calib.offset,
        scale=calib.scale,
        codes=codes,
    )


def dequantize(qindex: QuantizedIndex) -> np.ndarray:
    """Decoded float64 row matrix of the whole index."""
    codes = qindex.codes
    if qindex.scheme is Scheme.Q4:
        codes = unpack_nibbles(codes, qindex.dims)
    return decode(codes, qindex.offset, qindex.scale)


def search_quantized(qindex: QuantizedIndex, query, k: int = 2) -> list[SearchHit]:
    """Asymmetric top-k: the raw query scored against decoded rows."""
    q = _check_query(query, qindex.dims)
    if qindex.count == 0:
        return []
    scores = score_matrix(dequantize(qindex), q, qindex.metric)
    return rank_hits(qindex.ids, scores, qindex.metric, k)


def flat_equivalent_bytes(count: int, dims: int) -> int:
    """Bytes a float32 flat index would need for the same vectors."""
    return count * dims * 4


def code_storage_bytes(scheme: Scheme, count: int, dims: int) -> int:
    """Exact packed code size: count*dims for Q8, count*ceil(dims/2) for Q4."""
    if scheme is Scheme.Q8:
        return count * dims
    if scheme is Scheme.Q4:
        return count * ((dims + 1) // 2)
    return flat_equivalent_bytes(count, dims)
