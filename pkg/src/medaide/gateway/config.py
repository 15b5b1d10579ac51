"""Service configuration."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..chunking import ChunkParams
from ..errors import MedaideError
from ..index import Metric, Scheme
from ..quantize import DEFAULT_CLIP_QUANTILE
from ..rag import DEFAULT_HISTORY_WINDOW, DEFAULT_SYSTEM_PREAMBLE

TOKEN_ENV_VAR = "MEDAIDE_TOKEN"


class BadConfig(MedaideError):
    pass


@dataclass
class ServiceConfig:
    data_dir: Path
    auth_tokens: list[str] = field(default_factory=list)
    host: str = "127.0.0.1"
    port: int = 8470
    chunk_params: ChunkParams = field(default_factory=ChunkParams)
    embedder: str = "reference"
    embedder_dims: int = 384
    metric: Metric = Metric.COSINE
    scheme: Scheme = Scheme.FLAT
    clip_quantile: float = DEFAULT_CLIP_QUANTILE
    catalog_path: Path | None = None
    overhead_factor: float = 0.2
    history_window: int = DEFAULT_HISTORY_WINDOW
    system_preamble: str = DEFAULT_SYSTEM_PREAMBLE
    backend_type: str = "mock"  # "mock" or "process"
    backend_command: list[str] = field(default_factory=list)
    backend_timeout_s: float = 120.0
    retrieval_k: int = 2
    cors_origins: list[str] = field(default_factory=lambda: ["*"])
    static_dir: Path | None = None  # optional SPA bundle served at /ui

    def __post_init__(self) -> None:
        self.data_dir = Path(self.data_dir)
        env_token = os.environ.get(TOKEN_ENV_VAR)
        if env_token and env_token not in self.auth_tokens:
            self.auth_tokens.append(env_token)
        if not self.auth_tokens:
            raise BadConfig(
                f"at least one auth token is required (auth_tokens or ${TOKEN_ENV_VAR})"
            )
        if self.backend_type not in ("mock", "process"):
            raise BadConfig(f"backend_type must be 'mock' or 'process', got {self.backend_type!r}")
        if self.backend_type == "process" and not self.backend_command:
            raise BadConfig("backend_type 'process' requires backend_command")

    def ensure_dirs(self) -> None:
        try:
            self.sessions_dir.mkdir(parents=True, exist_ok=True)
            self.docs_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise BadConfig(f"data_dir {self.data_dir} is not writable: {exc}") from exc

    @property
    def sessions_dir(self) -> Path:
        return self.data_dir / "sessions"

    @property
    def docs_dir(self) -> Path:
        return self.data_dir / "docs"

    @property
    def index_path(self) -> Path:
        return self.data_dir / "index.maix"

    @property
    def chunks_path(self) -> Path:
        return self.data_dir / "chunks.jsonl"

    @property
    def corpus_path(self) -> Path:
        return self.data_dir / "corpus.jsonl"

    @classmethod
    def from_dict(cls, obj: dict) -> "ServiceConfig":
        known: dict = {}
        if "data_dir" not in obj:
            raise BadConfig("config requires data_dir")
        known["data_dir"] = Path(obj["data_dir"])
        known["auth_tokens"] = [str(t) for t in obj.get("auth_tokens", [])]
        for key in (
            "host",
            "embedder",
            "system_preamble",
            "backend_type",
        ):
            if key in obj:
                known[key] = str(obj[key])
        for key in ("port", "embedder_dims", "history_window", "retrieval_k"):
            if key in obj:
                known[key] = int(obj[key])
        for key in ("clip_quantile", "overhead_factor", "backend_timeout_s"):
            if key in obj:
                known[key] = float(obj[key])
        if "chunk_params" in obj:
            cp = obj["chunk_params"]
            known["chunk_params"] = ChunkParams(
                size_chars=int(cp.get("size_chars", 1000)),
                overlap_chars=int(cp.get("overlap_chars", 50)),
            )
        if "metric" in obj:
            known["metric"] = Metric(obj["metric"])
        if "scheme" in obj:
            known["scheme"] = Scheme(obj["scheme"])
        if "catalog_path" in obj and obj["catalog_path"]:
            known["catalog_path"] = Path(obj["catalog_path"])
        if "backend_command" in obj:
            known["backend_command"] = [str(c) for c in obj["backend_command"]]
        if "cors_origins" in obj:
            known["cors_origins"] = [str(o) for o in obj["cors_origins"]]
        if "static_dir" in obj and obj["static_dir"]:
            known["static_dir"] = Path(obj["static_dir"])
        return cls(**known)

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise BadConfig(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise BadConfig("config must be a JSON object")
        return cls.from_dict(obj)
