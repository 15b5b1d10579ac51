"""Sliding-window document chunking.

Documents are split into fixed-size character blocks with a configurable
overlap between consecutive blocks. Offsets are character offsets (not
bytes), so multibyte text never splits a code point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import MedaideError

DEFAULT_SIZE_CHARS = 1000
DEFAULT_OVERLAP_CHARS = 50


class InvalidChunkParams(MedaideError):
    pass


class MalformedChunkDump(MedaideError):
    def __init__(self, line_number: int, message: str = "bad chunk record"):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class ChunkParams:
    """Window size and overlap, both in characters."""

    size_chars: int = DEFAULT_SIZE_CHARS
    overlap_chars: int = DEFAULT_OVERLAP_CHARS

    def __post_init__(self) -> None:
        if self.size_chars < 1:
            raise InvalidChunkParams(f"size_chars must be >= 1, got {self.size_chars}")
        if not 0 <= self.overlap_chars < self.size_chars:
            raise InvalidChunkParams(
                f"overlap_chars must satisfy 0 <= overlap < size, got "
                f"overlap={self.overlap_chars} size={self.size_chars}"
            )

    @property
    def stride(self) -> int:
        return self.size_chars - self.overlap_chars


@dataclass(frozen=True)
class Chunk:
    """One character-span slice of a document. char_end is exclusive."""

    doc_id: str
    seq: int
    char_start: int
    char_end: int
    text: str

    @property
    def chunk_id(self) -> str:
        return chunk_id(self.doc_id, self.seq)


def chunk_id(doc_id: str, seq: int) -> str:
    """Stable chunk identifier; zero-padded so lexicographic order follows seq."""
    return f"{doc_id}#{seq:05d}"


def split_into_chunks(doc_id: str, text: str, params: ChunkParams | None = None) -> list[Chunk]:
    """Split text into overlapping windows.

    Window i covers [i * stride, i * stride + size_chars), truncated at the
    end of the document. Iteration stops once a window reaches the end, so a
    tail window fully contained in its predecessor is never emitted. Empty
    text yields no chunks.
    """
    params = params or ChunkParams()
    n = len(text)
    chunks: list[Chunk] = []
    seq = 0
    while seq * params.stride < n:
        start = seq * params.stride
        end = min(start + params.size_chars, n)
        chunks.append(Chunk(doc_id=doc_id, seq=seq, char_start=start, char_end=end, text=text[start:end]))
        if end >= n:
            break
        seq += 1
    return chunks


_DUMP_KEYS = ("doc_id", "seq", "char_start", "char_end", "text")


def write_chunks_jsonl(chunks: list[Chunk]) -> bytes:
    """Serialize chunks as UTF-8 JSONL, one object per line."""
    lines = []
    for c in chunks:
        lines.append(
            json.dumps(
                {"doc_id": c.doc_id, "seq": c.seq, "char_start": c.char_start, "char_end": c.char_end, "text": c.text},
                ensure_ascii=False,
            )
        )
    return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")


def read_chunks_jsonl(data: bytes) -> list[Chunk]:
    chunks: list[Chunk] = []
    # \n-only split; chunk text may contain NEL/U+2028 line separators.
    for line_number, line in enumerate(data.decode("utf-8").split("\n"), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedChunkDump(line_number, str(exc)) from exc
        if not isinstance(obj, dict) or any(k not in obj for k in _DUMP_KEYS):
            raise MalformedChunkDump(line_number, f"expected keys {_DUMP_KEYS}")
        chunks.append(
            Chunk(
                doc_id=str(obj["doc_id"]),
                seq=int(obj["seq"]),
                char_start=int(obj["char_start"]),
                char_end=int(obj["char_end"]),
                text=str(obj["text"]),
            )
        )
    return chunks
