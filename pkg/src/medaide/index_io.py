"""Binary index persistence.

Little-endian layout:

    magic   4 bytes  b"MAIX"
    version u16      1
    scheme  u8       0 flat, 1 Q8, 2 Q4
    metric  u8       0 L2, 1 cosine
    dims    u32
    count   u64
    ids     count x (u32 length + UTF-8 bytes)
    payload flat: raw float32 row-major matrix
            quantized: offset[dims] f32, scale[dims] f32, packed codes
    crc32   u32      CRC-32 of all preceding bytes

Serialization is deterministic: identical indexes produce identical files.
"""

from __future__ import annotations

import os
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import MedaideError
from .index import FlatIndex, Metric, Scheme
from .quantize import QuantizedIndex

MAGIC = b"MAIX"
VERSION = 1

_SCHEME_CODES = {Scheme.FLAT: 0, Scheme.Q8: 1, Scheme.Q4: 2}
_SCHEME_FROM_CODE = {v: k for k, v in _SCHEME_CODES.items()}
_METRIC_CODES = {Metric.L2: 0, Metric.COSINE: 1}
_METRIC_FROM_CODE = {v: k for k, v in _METRIC_CODES.items()}


class BadMagic(MedaideError):
    pass


class UnsupportedVersion(MedaideError):
    pass


class CorruptPayload(MedaideError):
    pass


def _f32_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def serialize_index(index: FlatIndex | QuantizedIndex) -> bytes:
    parts = [MAGIC, struct.pack("<H", VERSION)]
    if isinstance(index, FlatIndex):
        scheme = Scheme.FLAT
    else:
        scheme = index.scheme
    parts.append(struct.pack("<BB", _SCHEME_CODES[scheme], _METRIC_CODES[index.metric]))
    parts.append(struct.pack("<IQ", index.dims, index.count))
    for id_ in index.ids:
        raw = id_.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
    if isinstance(index, FlatIndex):
        parts.append(_f32_bytes(index.vectors))
    else:
        parts.append(_f32_bytes(index.offset))
        parts.append(_f32_bytes(index.scale))
        parts.append(np.ascontiguousarray(index.codes, dtype=np.uint8).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptPayload(f"truncated payload at byte {self.pos}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def deserialize_index(data: bytes) -> FlatIndex | QuantizedIndex:
    if len(data) < len(MAGIC):
        raise CorruptPayload("file shorter than magic")
    if data[: len(MAGIC)] != MAGIC:
        raise BadMagic(f"expected magic {MAGIC!r}, got {data[:4]!r}")
    if len(data) < len(MAGIC) + 2:
        raise CorruptPayload("file shorter than header")
    (version,) = struct.unpack("<H", data[4:6])
    if version != VERSION:
        raise UnsupportedVersion(f"version {version}, this build reads {VERSION}")
    if len(data) < 10:
        raise CorruptPayload("missing checksum")
    (stored_crc,) = struct.unpack("<I", data[-4:])
    actual_crc = zlib.crc32(data[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise CorruptPayload(f"checksum mismatch: stored {stored_crc:#x}, computed {actual_crc:#x}")

    cur = _Cursor(data[:-4])
    cur.pos = 6
    scheme_code, metric_code = cur.unpack("<BB")
    if scheme_code not in _SCHEME_FROM_CODE:
        raise CorruptPayload(f"unknown scheme code {scheme_code}")
    if metric_code not in _METRIC_FROM_CODE:
        raise CorruptPayload(f"unknown metric code {metric_code}")
    scheme = _SCHEME_FROM_CODE[scheme_code]
    metric = _METRIC_FROM_CODE[metric_code]
    dims, count = cur.unpack("<IQ")
    if dims == 0:
        raise CorruptPayload("dims must be >= 1")
    ids: list[str] = []
    for _ in range(count):
        (n,) = cur.unpack("<I")
        try:
            ids.append(cur.take(n).decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise CorruptPayload(f"id table is not valid UTF-8: {exc}") from exc

    if scheme is Scheme.FLAT:
        raw = cur.take(count * dims * 4)
        vectors = np.frombuffer(raw, dtype="<f4").reshape(count, dims).copy()
        index: FlatIndex | QuantizedIndex = FlatIndex(dims=dims, metric=metric, ids=ids, vectors=vectors)
    else:
        offset = np.frombuffer(cur.take(dims * 4), dtype="<f4").copy()
        scale = np.frombuffer(cur.take(dims * 4), dtype="<f4").copy()
        code_cols = dims if scheme is Scheme.Q8 else (dims + 1) // 2
        codes = np.frombuffer(cur.take(count * code_cols), dtype=np.uint8).reshape(count, code_cols).copy()
        index = QuantizedIndex(
            scheme=scheme, dims=dims, metric=metric, ids=ids, offset=offset, scale=scale, codes=codes
        )
    if cur.pos != len(cur.data):
        raise CorruptPayload(f"{len(cur.data) - cur.pos} unexpected trailing bytes")
    return index


def save_index(index: FlatIndex | QuantizedIndex, path: str | Path) -> None:
    """Write atomically: serialize to a temp file, then rename into place."""
    path = Path(path)
    blob = serialize_index(index)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def load_index(path: str | Path) -> FlatIndex | QuantizedIndex:
    return deserialize_index(Path(path).read_bytes())
