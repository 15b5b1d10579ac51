"""Authenticated local HTTP service binding all modules together."""

from __future__ import annotations

import hmac
import json
import logging
import time
from typing import Iterator

from fastapi import Depends, FastAPI, Form, Request, UploadFile
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel

from .. import __version__
from ..backends import BackendFailure, BackendTimeout, ProcessBackend
from ..chunking import Chunk, split_into_chunks, write_chunks_jsonl
from ..embedding import ReferenceEmbedder, embed_batch
from ..errors import MedaideError
from ..index import Metric, Scheme, build_flat
from ..index_io import save_index
from ..ingest import (
    csv_to_instruction,
    parse_csv,
    read_jsonl,
    refine,
    write_jsonl,
)
from ..modelselect import HardwareProfile, default_catalog, load_catalog, rank_candidates
from ..quantize import quantize_index
from ..rag import MockBackend, chat_turn
from .config import ServiceConfig
from .state import IndexHolder, IndexSnapshot, SessionStore, load_snapshot

logger = logging.getLogger(__name__)

UNAUTHORIZED = "UNAUTHORIZED"
NOT_FOUND = "NOT_FOUND"
BAD_REQUEST = "BAD_REQUEST"
BACKEND_FAILURE = "BACKEND_FAILURE"
INTERNAL = "INTERNAL"


class ApiException(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class ChatRequest(BaseModel):
    query: str
    max_tokens: int | None = None
    temperature: float | None = None
    stream: bool = False


class SelectModelRequest(BaseModel):
    profile: dict
    mode: str = "accuracy"


class RebuildRequest(BaseModel):
    chunk_params: dict | None = None
    scheme: str | None = None


def build_backend(config: ServiceConfig):
    if config.backend_type == "process":
        return ProcessBackend(config.backend_command, timeout_s=config.backend_timeout_s)
    return MockBackend()


def build_embedder(config: ServiceConfig) -> ReferenceEmbedder:
    if config.embedder != "reference":
        raise MedaideError(f"unknown embedder {config.embedder!r}")
    return ReferenceEmbedder(dims=config.embedder_dims)


def create_app(config: ServiceConfig) -> FastAPI:
    """Build the service around one config; all state hangs off the app."""
    config.ensure_dirs()
    app = FastAPI(title="medaide", version=__version__)
    if config.cors_origins:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=config.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )
    if config.static_dir and config.static_dir.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=config.static_dir, html=True), name="ui")

    embedder = build_embedder(config)
    backend = build_backend(config)
    catalog = load_catalog(config.catalog_path) if config.catalog_path else default_catalog()

    sessions = SessionStore(config.sessions_dir)
    sessions.load()

    try:
        snapshot = load_snapshot(config.index_path, config.chunks_path)
    except MedaideError as exc:
        logger.warning("stored index unusable (%s); starting empty", exc)
        snapshot = IndexSnapshot(index=None)
    holder = IndexHolder(snapshot)

    tokens = list(config.auth_tokens)

    def require_token(request: Request) -> None:
        header = request.headers.get("authorization", "")
        if not header.startswith("Bearer "):
            raise ApiException(401, UNAUTHORIZED, "missing bearer token")
        presented = header[len("Bearer ") :].strip()
        for token in tokens:
            if hmac.compare_digest(presented, token):
                return
        raise ApiException(401, UNAUTHORIZED, "unknown token")

    @app.exception_handler(ApiException)
    async def handle_api_exception(_request: Request, exc: ApiException) -> JSONResponse:
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    @app.exception_handler(MedaideError)
    async def handle_medaide_error(_request: Request, exc: MedaideError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"code": BAD_REQUEST, "message": str(exc)})

    @app.exception_handler(Exception)
    async def handle_unexpected(_request: Request, exc: Exception) -> JSONResponse:
        logger.exception("unhandled error")
        return JSONResponse(status_code=500, content={"code": INTERNAL, "message": str(exc)})

    def health_payload() -> dict:
        snap = holder.get()
        return {
            "status": "ok",
            "index_loaded": snap.loaded,
            "backend": getattr(backend, "name", "unknown"),
        }

    @app.get("/health")
    def health() -> dict:
        return health_payload()

    @app.get("/api/v1/health")
    def health_v1() -> dict:
        return health_payload()

    @app.post("/api/v1/sessions", dependencies=[Depends(require_token)])
    def create_session() -> dict:
        session = sessions.create()
        return {"session_id": session.session_id}

    @app.get("/api/v1/sessions/{session_id}", dependencies=[Depends(require_token)])
    def get_session(session_id: str) -> dict:
        session = sessions.get(session_id)
        if session is None:
            raise ApiException(404, NOT_FOUND, f"no session {session_id!r}")
        return {
            "session_id": session.session_id,
            "created_at": session.created_at,
            "turns": [t.as_dict() for t in session.turns],
        }

    @app.post("/api/v1/sessions/{session_id}/chat", dependencies=[Depends(require_token)])
    def chat(session_id: str, body: ChatRequest):
        session = sessions.get(session_id)
        if session is None:
            raise ApiException(404, NOT_FOUND, f"no session {session_id!r}")
        if not body.query.strip():
            raise ApiException(400, BAD_REQUEST, "query must be non-empty")
        snap = holder.get()
        if snap.index is None:
            raise ApiException(400, BAD_REQUEST, "no index loaded; POST /api/v1/index/rebuild first")
        from ..backends import GenerationParams

        params = GenerationParams(
            max_tokens=body.max_tokens or 256,
            temperature=body.temperature if body.temperature is not None else 0.0,
            timeout_s=config.backend_timeout_s,
        )
        started = time.perf_counter()
        with sessions.lock(session_id):
            try:
                turn = chat_turn(
                    session,
                    body.query,
                    snap.index,
                    embedder,
                    snap.chunks,
                    backend,
                    params=params,
                    k=config.retrieval_k,
                    system_preamble=config.system_preamble,
                    history_window=config.history_window,
                )
            except BackendTimeout as exc:
                raise ApiException(504, BACKEND_FAILURE, str(exc)) from exc
            except BackendFailure as exc:
                raise ApiException(502, BACKEND_FAILURE, str(exc)) from exc
            sessions.append_turn(session_id, turn)
        latency_ms = (time.perf_counter() - started) * 1000.0
        payload = {
            "response": turn.response,
            "citations": [c.as_dict() for c in turn.citations],
            "latency_ms": latency_ms,
        }
        if not body.stream:
            return payload
        return StreamingResponse(_stream_chat(payload), media_type="application/x-ndjson")

    def _stream_chat(payload: dict) -> Iterator[bytes]:
        text = payload["response"]
        for start in range(0, len(text), 64):
            yield (json.dumps({"delta": text[start : start + 64]}, ensure_ascii=False) + "\n").encode()
        tail = {"done": True, "citations": payload["citations"], "latency_ms": payload["latency_ms"]}
        yield (json.dumps(tail, ensure_ascii=False) + "\n").encode()

    @app.get("/api/v1/models", dependencies=[Depends(require_token)])
    def get_models() -> list[dict]:
        return [spec.as_dict() for spec in catalog]

    @app.post("/api/v1/select-model", dependencies=[Depends(require_token)])
    def select_model(body: SelectModelRequest) -> dict:
        try:
            profile = HardwareProfile.from_json(body.profile)
            result = rank_candidates(profile, catalog, mode=body.mode, overhead_factor=config.overhead_factor)
        except MedaideError as exc:
            raise ApiException(400, BAD_REQUEST, str(exc)) from exc
        return result.as_dict()

    @app.post("/api/v1/ingest", dependencies=[Depends(require_token)])
    def ingest(
        file: UploadFile,
        source_tag: str = Form(default=""),
        disease_column: str = Form(default="Disease"),
        has_header: bool = Form(default=True),
    ) -> dict:
        raw = file.file.read()
        name = file.filename or "upload"
        tag = source_tag or name.rsplit(".", 1)[0]
        try:
            if name.lower().endswith(".jsonl"):
                records = read_jsonl(raw)
            else:
                rows = parse_csv(raw, has_header=has_header)
                records = [csv_to_instruction(r, disease_column=disease_column, source_tag=tag) for r in rows]
        except MedaideError as exc:
            raise ApiException(400, BAD_REQUEST, str(exc)) from exc
        kept, report = refine(records)
        with config.corpus_path.open("ab") as fh:
            fh.write(write_jsonl(kept))
        return {"report": report.as_dict(), "written": len(kept), "corpus_path": str(config.corpus_path)}

    @app.post("/api/v1/index/rebuild", dependencies=[Depends(require_token)])
    def rebuild(body: RebuildRequest | None = None) -> dict:
        body = body or RebuildRequest()
        params = config.chunk_params
        if body.chunk_params:
            from ..chunking import ChunkParams

            params = ChunkParams(
                size_chars=int(body.chunk_params.get("size_chars", params.size_chars)),
                overlap_chars=int(body.chunk_params.get("overlap_chars", params.overlap_chars)),
            )
        scheme = Scheme(body.scheme) if body.scheme else config.scheme
        snapshot = rebuild_snapshot(config, embedder, params, scheme)
        holder.swap(snapshot)
        count = snapshot.index.count if snapshot.index else 0
        return {"count": count, "dims": embedder.dims, "scheme": snapshot.scheme.value}

    app.state.config = config
    app.state.holder = holder
    app.state.sessions = sessions
    app.state.backend = backend
    return app


def rebuild_snapshot(config: ServiceConfig, embedder, params, scheme: Scheme) -> IndexSnapshot:
    """Chunk and embed every document under data_dir/docs, build the index,
    persist it, and return the new snapshot."""
    docs: list[tuple[str, str]] = []
    for path in sorted(config.docs_dir.glob("*")):
        if path.suffix.lower() in (".txt", ".md") and path.is_file():
            docs.append((path.stem, path.read_text(encoding="utf-8")))
    chunks: list[Chunk] = []
    for doc_id, text in docs:
        chunks.extend(split_into_chunks(doc_id, text, params))
    vectors = embed_batch([c.text for c in chunks], embedder)
    if config.metric is Metric.COSINE:
        usable = [(c, v) for c, v in zip(chunks, vectors) if v.normalized]
        dropped = len(chunks) - len(usable)
        if dropped:
            logger.warning("dropping %d chunks with no tokens (zero embedding)", dropped)
        chunks = [c for c, _ in usable]
        vectors = [v for _, v in usable]
    index = build_flat(
        [c.chunk_id for c in chunks],
        [v.values for v in vectors],
        metric=config.metric,
        dims=embedder.dims,
    )
    final = index
    if scheme in (Scheme.Q8, Scheme.Q4) and index.count > 0:
        final = quantize_index(index, scheme=scheme, clip_quantile=config.clip_quantile)
    save_index(final, config.index_path)
    config.chunks_path.write_bytes(write_chunks_jsonl(chunks))
    return IndexSnapshot(index=final, chunks={c.chunk_id: c for c in chunks})
