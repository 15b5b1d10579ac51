"""medaide: an on-premise medical assistant stack.

Corpus ingestion, overlapping-window chunking, deterministic embeddings,
exact and scalar-quantized vector search, hardware-aware model selection,
and a grounded chat gateway with an HTTP API and CLI.
"""

from .chunking import Chunk, ChunkParams, chunk_id, split_into_chunks
from .embedding import EmbeddingVector, ReferenceEmbedder, embed_batch, normalize, reference_embed
from .errors import MedaideError
from .index import FlatIndex, Metric, Scheme, SearchHit, brute_force_oracle, build_flat, search
from .index_io import load_index, save_index
from .ingest import (
    InstructionRecord,
    RawRecord,
    RefinementReport,
    SourceRegistry,
    corpus_stats,
    csv_to_instruction,
    parse_csv,
    read_jsonl,
    refine,
    write_jsonl,
)
from .modelselect import (
    HardwareProfile,
    ModelSpec,
    SelectionResult,
    check_compatibility,
    default_catalog,
    estimate_memory,
    rank_candidates,
)
from .quantize import QuantizedIndex, calibrate, quantize_index, search_quantized
from .rag import ChatTurn, MockBackend, Session, assemble_prompt, chat_turn, new_session, retrieve_context

__version__ = "0.1.0"

__all__ = [
    "Chunk",
    "ChunkParams",
    "ChatTurn",
    "EmbeddingVector",
    "FlatIndex",
    "HardwareProfile",
    "InstructionRecord",
    "MedaideError",
    "Metric",
    "MockBackend",
    "ModelSpec",
    "QuantizedIndex",
    "RawRecord",
    "ReferenceEmbedder",
    "RefinementReport",
    "Scheme",
    "SearchHit",
    "SelectionResult",
    "Session",
    "SourceRegistry",
    "assemble_prompt",
    "brute_force_oracle",
    "build_flat",
    "calibrate",
    "chat_turn",
    "check_compatibility",
    "chunk_id",
    "corpus_stats",
    "csv_to_instruction",
    "default_catalog",
    "embed_batch",
    "estimate_memory",
    "load_index",
    "new_session",
    "normalize",
    "parse_csv",
    "quantize_index",
    "rank_candidates",
    "read_jsonl",
    "reference_embed",
    "refine",
    "retrieve_context",
    "save_index",
    "search",
    "search_quantized",
    "split_into_chunks",
    "write_jsonl",
]
