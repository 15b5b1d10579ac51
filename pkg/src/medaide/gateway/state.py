"""Mutable service state: the swappable index snapshot and the session store."""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..chunking import Chunk, read_chunks_jsonl
from ..errors import MedaideError
from ..index import FlatIndex, Scheme
from ..index_io import load_index
from ..quantize import QuantizedIndex
from ..rag import ChatTurn, Citation, Session

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IndexSnapshot:
    """One immutable (index, chunk store) pair; swapped as a unit."""

    index: FlatIndex | QuantizedIndex | None
    chunks: dict[str, Chunk] = field(default_factory=dict)

    @property
    def loaded(self) -> bool:
        return self.index is not None and self.index.count > 0

    @property
    def scheme(self) -> Scheme:
        if isinstance(self.index, QuantizedIndex):
            return self.index.scheme
        return Scheme.FLAT


class IndexHolder:
    """Atomic reference to the current snapshot. Readers take no lock; the
    swap happens under one so concurrent rebuilds serialize."""

    def __init__(self, snapshot: IndexSnapshot | None = None):
        self._snapshot = snapshot or IndexSnapshot(index=None)
        self._swap_lock = threading.Lock()

    def get(self) -> IndexSnapshot:
        return self._snapshot

    def swap(self, snapshot: IndexSnapshot) -> None:
        with self._swap_lock:
            self._snapshot = snapshot


def load_snapshot(index_path: Path, chunks_path: Path) -> IndexSnapshot:
    """Load a persisted snapshot; missing files mean an empty index."""
    if not index_path.exists() or not chunks_path.exists():
        return IndexSnapshot(index=None)
    index = load_index(index_path)
    chunks = read_chunks_jsonl(chunks_path.read_bytes())
    return IndexSnapshot(index=index, chunks={c.chunk_id: c for c in chunks})


class SessionStore:
    """Append-only JSONL session log, one file per session.

    Line 1 holds {"session_id", "created_at"}; every following line is one
    turn. Files that fail to parse at startup are quarantined (renamed with
    a .quarantined suffix) rather than aborting service start.
    """

    def __init__(self, directory: Path):
        self.directory = directory
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def load(self) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        for path in sorted(self.directory.glob("*.jsonl")):
            try:
                session = self._parse_file(path)
            except (MedaideError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                quarantine = path.with_suffix(".jsonl.quarantined")
                logger.warning("quarantining corrupt session file %s: %s", path.name, exc)
                path.rename(quarantine)
                continue
            self._sessions[session.session_id] = session

    def _parse_file(self, path: Path) -> Session:
        lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
        if not lines:
            raise MedaideError("empty session file")
        meta = json.loads(lines[0])
        session = Session(session_id=str(meta["session_id"]), created_at=float(meta["created_at"]))
        for raw in lines[1:]:
            obj = json.loads(raw)
            session.turns.append(
                ChatTurn(
                    user_query=str(obj["user_query"]),
                    response=str(obj["response"]),
                    citations=tuple(
                        Citation(
                            chunk_id=str(c["chunk_id"]),
                            doc_id=str(c["doc_id"]),
                            score=float(c["score"]),
                        )
                        for c in obj["citations"]
                    ),
                    timestamp=float(obj["timestamp"]),
                )
            )
        return session

    def _path(self, session_id: str) -> Path:
        return self.directory / f"{session_id}.jsonl"

    def lock(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            if session_id not in self._locks:
                self._locks[session_id] = threading.Lock()
            return self._locks[session_id]

    def create(self) -> Session:
        import uuid

        session = Session(session_id=uuid.uuid4().hex, created_at=time.time())
        with self._registry_lock:
            self._sessions[session.session_id] = session
        self._path(session.session_id).write_text(
            json.dumps({"session_id": session.session_id, "created_at": session.created_at}) + "\n",
            encoding="utf-8",
        )
        return session

    def get(self, session_id: str) -> Session | None:
        return self._sessions.get(session_id)

    def list_ids(self) -> list[str]:
        return sorted(self._sessions)

    def append_turn(self, session_id: str, turn: ChatTurn) -> None:
        with self._path(session_id).open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(turn.as_dict(), ensure_ascii=False) + "\n")
            fh.flush()
