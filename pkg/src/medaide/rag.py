"""Retrieval-grounded chat: context lookup, prompt assembly, sessions.

Each turn embeds the user query, pulls the two nearest chunks from the
index, renders a sectioned prompt (context, recent history, instruction),
and appends the backend's answer to the session together with citations
for every chunk that was put in front of the model.
"""

from __future__ import annotations

import re
import time
import uuid
from dataclasses import dataclass, field
from typing import Mapping

from .backends import BackendFailure, GenerationParams, MalformedPrompt
from .chunking import Chunk
from .embedding import Embedder
from .errors import MedaideError
from .index import DimMismatch, FlatIndex, SearchHit
from .index import search as flat_search
from .quantize import QuantizedIndex, search_quantized

DEFAULT_K = 2
DEFAULT_HISTORY_WINDOW = 4
DEFAULT_SYSTEM_PREAMBLE = (
    "You are a medical assistant. Answer using the provided context where "
    "possible, and advise consulting a healthcare professional for diagnosis "
    "and treatment decisions."
)

SECTION_CONTEXT = "### Context:"
SECTION_HISTORY = "### History:"
SECTION_INSTRUCTION = "### Instruction:"
SECTION_RESPONSE = "### Response:"

_CITE_RE = re.compile(r"\[\[cite:([^\]]*)\]\]")


class UnknownChunkId(MedaideError):
    pass


@dataclass(frozen=True)
class Citation:
    chunk_id: str
    doc_id: str
    score: float

    def as_dict(self) -> dict:
        return {"chunk_id": self.chunk_id, "doc_id": self.doc_id, "score": self.score}


@dataclass(frozen=True)
class ChatTurn:
    user_query: str
    response: str
    citations: tuple[Citation, ...]
    timestamp: float

    def as_dict(self) -> dict:
        return {
            "user_query": self.user_query,
            "response": self.response,
            "citations": [c.as_dict() for c in self.citations],
            "timestamp": self.timestamp,
        }


@dataclass
class Session:
    session_id: str
    created_at: float
    turns: list[ChatTurn] = field(default_factory=list)


def new_session(session_id: str | None = None) -> Session:
    return Session(session_id=session_id or uuid.uuid4().hex, created_at=time.time())


@dataclass(frozen=True)
class ContextBlock:
    chunk_id: str
    doc_id: str
    score: float
    text: str


@dataclass(frozen=True)
class PromptBundle:
    system_preamble: str
    context_blocks: tuple[ContextBlock, ...]
    history: tuple[ChatTurn, ...]
    user_query: str

    def render(self) -> str:
        """Deterministic prompt text; empty sections are omitted entirely."""
        parts = [self.system_preamble.rstrip("\n")]
        if self.context_blocks:
            parts.append(SECTION_CONTEXT)
            for block in self.context_blocks:
                parts.append(f"[[cite:{block.chunk_id}]] (source: {block.doc_id})\n{block.text}")
        if self.history:
            parts.append(SECTION_HISTORY)
            for turn in self.history:
                parts.append(f"User: {turn.user_query}\nAssistant: {turn.response}")
        parts.append(SECTION_INSTRUCTION)
        parts.append(self.user_query)
        parts.append(SECTION_RESPONSE)
        return "\n".join(parts) + "\n"


def retrieve_context(
    query: str,
    index: FlatIndex | QuantizedIndex,
    embedder: Embedder,
    chunk_store: Mapping[str, Chunk],
    k: int = DEFAULT_K,
) -> list[tuple[Chunk, float]]:
    """Embed the query and resolve the top-k index hits to chunks."""
    if embedder.dims != index.dims:
        raise DimMismatch(f"embedder dims {embedder.dims} != index dims {index.dims}")
    vector = embedder.embed(query)
    hits: list[SearchHit]
    if isinstance(index, QuantizedIndex):
        hits = search_quantized(index, vector.values, k=k)
    else:
        hits = flat_search(index, vector.values, k=k)
    out: list[tuple[Chunk, float]] = []
    for hit in hits:
        chunk = chunk_store.get(hit.id)
        if chunk is None:
            raise UnknownChunkId(f"index hit {hit.id!r} not present in the chunk store")
        out.append((chunk, hit.score))
    return out


def assemble_prompt(
    session: Session,
    query: str,
    contexts: list[tuple[Chunk, float]],
    system_preamble: str = DEFAULT_SYSTEM_PREAMBLE,
    history_window: int = DEFAULT_HISTORY_WINDOW,
) -> tuple[PromptBundle, str]:
    """Build the prompt bundle and its rendered text for one turn."""
    blocks = tuple(
        ContextBlock(chunk_id=c.chunk_id, doc_id=c.doc_id, score=score, text=c.text)
        for c, score in contexts
    )
    history = tuple(session.turns[-history_window:]) if history_window > 0 else ()
    bundle = PromptBundle(
        system_preamble=system_preamble,
        context_blocks=blocks,
        history=history,
        user_query=query,
    )
    return bundle, bundle.render()


def chat_turn(
    session: Session,
    query: str,
    index: FlatIndex | QuantizedIndex,
    embedder: Embedder,
    chunk_store: Mapping[str, Chunk],
    backend,
    params: GenerationParams | None = None,
    k: int = DEFAULT_K,
    system_preamble: str = DEFAULT_SYSTEM_PREAMBLE,
    history_window: int = DEFAULT_HISTORY_WINDOW,
) -> ChatTurn:
    """Run one grounded turn and append it to the session.

    The session is only mutated after the backend succeeds; failures and
    timeouts leave it untouched.
    """
    params = params or GenerationParams()
    contexts = retrieve_context(query, index, embedder, chunk_store, k=k)
    _, rendered = assemble_prompt(
        session, query, contexts, system_preamble=system_preamble, history_window=history_window
    )
    response = backend.generate(rendered, params)
    if not response:
        raise BackendFailure(f"backend {getattr(backend, 'name', backend)!r} returned an empty response")
    turn = ChatTurn(
        user_query=query,
        response=response,
        citations=tuple(Citation(chunk_id=c.chunk_id, doc_id=c.doc_id, score=score) for c, score in contexts),
        timestamp=time.time(),
    )
    session.turns.append(turn)
    return turn


# --- Mock backend --------------------------------------------------------


def mock_generate(prompt: str, params: GenerationParams | None = None) -> str:
    """Deterministic test double: echoes the cited chunk ids and the query.

    Returns "CTX[id1,id2] Q[query]". Raises MalformedPrompt when the
    instruction or response section is missing.
    """
    del params
    instr_marker = SECTION_INSTRUCTION + "\n"
    instr_at = prompt.find(instr_marker)
    resp_at = prompt.rfind("\n" + SECTION_RESPONSE)
    if instr_at < 0 or resp_at < 0 or resp_at < instr_at:
        raise MalformedPrompt("prompt lacks instruction/response sections")
    query = prompt[instr_at + len(instr_marker) : resp_at]
    ids: list[str] = []
    ctx_at = prompt.find(SECTION_CONTEXT)
    if 0 <= ctx_at < instr_at:
        ids = _CITE_RE.findall(prompt[ctx_at:instr_at])
    return f"CTX[{','.join(ids)}] Q[{query}]"


class MockBackend:
    """In-process deterministic backend used by tests and default configs."""

    name = "mock"
    deterministic = True

    def generate(self, prompt: str, params: GenerationParams | None = None) -> str:
        return mock_generate(prompt, params)
