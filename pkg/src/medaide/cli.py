"""Command-line interface.

Exit codes: 0 success, 1 validation error, 2 I/O error. Human-readable
output goes to stdout; pass --json for machine output.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .chunking import ChunkParams, read_chunks_jsonl, split_into_chunks, write_chunks_jsonl
from .embedding import ReferenceEmbedder, embed_batch
from .errors import MedaideError
from .index import FlatIndex, Metric, Scheme, build_flat, search
from .index_io import load_index, save_index
from .ingest import (
    corpus_stats,
    csv_to_instruction,
    load_registry,
    parse_csv,
    read_jsonl,
    refine,
    write_jsonl,
)
from .modelselect import (
    default_catalog,
    load_catalog,
    rank_candidates,
)
from .modelselect import HardwareProfile
from .quantize import (
    QuantizedIndex,
    code_storage_bytes,
    flat_equivalent_bytes,
    quantize_index,
    search_quantized,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


def _chunks_path_for(index_path: Path) -> Path:
    return index_path.with_name(index_path.name + ".chunks.jsonl")


def cmd_ingest(args: argparse.Namespace) -> int:
    records = []
    for path in args.inputs:
        path = Path(path)
        tag = args.source_tag if args.source_tag and len(args.inputs) == 1 else path.stem
        data = path.read_bytes()
        if path.suffix.lower() == ".jsonl":
            records.extend(read_jsonl(data))
        else:
            for row in parse_csv(data, has_header=not args.no_header):
                records.extend([csv_to_instruction(row, disease_column=args.disease_column, source_tag=tag)])
    kept, report = refine(records)
    Path(args.out).write_bytes(write_jsonl(kept))
    registry = load_registry(args.registry) if args.registry else None
    stats = corpus_stats(kept, registry)
    if args.json:
        print(json.dumps({"report": report.as_dict(), "stats": stats.as_dict(), "out": str(args.out)}))
    else:
        print(f"wrote {report.kept} records to {args.out}")
        for key, value in report.as_dict().items():
            print(f"  {key}: {value}")
        for row in stats.rows:
            flag = "  MISMATCH" if row.mismatch else ""
            expected = "-" if row.expected_samples is None else str(row.expected_samples)
            print(f"  {row.display_name}: {row.actual} (expected {expected}){flag}")
    return EXIT_OK


def cmd_build_index(args: argparse.Namespace) -> int:
    docs_dir = Path(args.docs)
    if not docs_dir.is_dir():
        raise FileNotFoundError(f"docs directory {docs_dir} not found")
    params = ChunkParams(size_chars=args.size, overlap_chars=args.overlap)
    embedder = ReferenceEmbedder(dims=args.dims)
    metric = Metric(args.metric)
    chunks = []
    for path in sorted(docs_dir.glob("*")):
        if path.suffix.lower() in (".txt", ".md") and path.is_file():
            chunks.extend(split_into_chunks(path.stem, path.read_text(encoding="utf-8"), params))
    vectors = embed_batch([c.text for c in chunks], embedder)
    if metric is Metric.COSINE:
        pairs = [(c, v) for c, v in zip(chunks, vectors) if v.normalized]
        chunks = [c for c, _ in pairs]
        vectors = [v for _, v in pairs]
    index = build_flat([c.chunk_id for c in chunks], [v.values for v in vectors], metric=metric, dims=args.dims)
    final: FlatIndex | QuantizedIndex = index
    scheme = Scheme(args.scheme)
    if scheme in (Scheme.Q8, Scheme.Q4) and index.count > 0:
        final = quantize_index(index, scheme=scheme, clip_quantile=args.clip)
    out = Path(args.out)
    save_index(final, out)
    _chunks_path_for(out).write_bytes(write_chunks_jsonl(chunks))
    result = {"count": len(chunks), "dims": args.dims, "scheme": scheme.value, "out": str(out)}
    if args.json:
        print(json.dumps(result))
    else:
        print(f"indexed {result['count']} chunks (dims {args.dims}, {scheme.value}) -> {out}")
    return EXIT_OK


def _load_index_and_chunks(index_path: Path, chunks_arg: str | None):
    index = load_index(index_path)
    chunks_path = Path(chunks_arg) if chunks_arg else _chunks_path_for(index_path)
    chunk_store = {}
    if chunks_path.exists():
        chunk_store = {c.chunk_id: c for c in read_chunks_jsonl(chunks_path.read_bytes())}
    return index, chunk_store


def cmd_query(args: argparse.Namespace) -> int:
    index, chunk_store = _load_index_and_chunks(Path(args.index), args.chunks)
    embedder = ReferenceEmbedder(dims=index.dims)
    vector = embedder.embed(args.query)
    if isinstance(index, QuantizedIndex):
        hits = search_quantized(index, vector.values, k=args.k)
    else:
        hits = search(index, vector.values, k=args.k)
    citations = []
    for hit in hits:
        chunk = chunk_store.get(hit.id)
        citations.append(
            {
                "chunk_id": hit.id,
                "doc_id": chunk.doc_id if chunk else "",
                "score": hit.score,
                "text": chunk.text if chunk else "",
            }
        )
    if args.json:
        print(json.dumps({"query": args.query, "citations": citations}))
    else:
        for rank, c in enumerate(citations):
            snippet = " ".join(c["text"].split())[:80]
            print(f"{rank + 1}. {c['chunk_id']} (doc {c['doc_id']}, score {c['score']:.4f}) {snippet}")
        if not citations:
            print("no results (empty index)")
    return EXIT_OK


def cmd_select(args: argparse.Namespace) -> int:
    profile = HardwareProfile.from_json(json.loads(Path(args.profile).read_text(encoding="utf-8")))
    catalog = load_catalog(args.catalog) if args.catalog else default_catalog()
    result = rank_candidates(profile, catalog, mode=args.mode, overhead_factor=args.overhead)
    if args.json:
        print(json.dumps(result.as_dict()))
    else:
        for entry in result.ranked:
            status = "ok" if entry.feasible else ",".join(entry.violations)
            print(
                f"{entry.spec.name:<18} {entry.spec.quant.value:<4} "
                f"{entry.est_bytes / 1e9:7.2f} GB  score {entry.spec.accuracy_score:5.1f}  [{status}]"
            )
        print(f"chosen: {result.chosen.name if result.chosen else 'none'}")
    if result.chosen is None:
        print("no feasible model for this profile", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    if args.reps < 1:
        raise MedaideError(f"repetitions must be >= 1, got {args.reps}")
    index, _ = _load_index_and_chunks(Path(args.index), args.chunks)
    queries = [q for q in Path(args.queries).read_text(encoding="utf-8").splitlines() if q.strip()]
    if not queries:
        raise MedaideError("queries file has no non-empty lines")
    embedder = ReferenceEmbedder(dims=index.dims)
    vectors = [embedder.embed(q).values for q in queries]
    quantized = isinstance(index, QuantizedIndex)
    latencies = []
    for _ in range(args.reps):
        for vec in vectors:
            started = time.perf_counter()
            if quantized:
                search_quantized(index, vec, k=args.k)
            else:
                search(index, vec, k=args.k)
            latencies.append((time.perf_counter() - started) * 1000.0)
    p50, p95, p99 = (float(v) for v in np.percentile(latencies, [50, 95, 99]))
    flat_bytes = flat_equivalent_bytes(index.count, index.dims)
    if quantized:
        code_bytes = index.code_bytes
        resident = code_bytes + index.offset.nbytes + index.scale.nbytes
        assert code_bytes == code_storage_bytes(index.scheme, index.count, index.dims)
    else:
        code_bytes = index.vectors.nbytes
        resident = code_bytes
    resident += sum(len(i.encode("utf-8")) for i in index.ids)
    report = {
        "queries": len(queries),
        "reps": args.reps,
        "searches": len(latencies),
        "p50_ms": p50,
        "p95_ms": p95,
        "p99_ms": p99,
        "resident_bytes": resident,
        "code_bytes": code_bytes,
        "flat_equivalent_bytes": flat_bytes,
        "storage_ratio": code_bytes / flat_bytes if flat_bytes else 1.0,
    }
    if args.json:
        print(json.dumps(report))
    else:
        print(f"searches: {report['searches']}  (queries {len(queries)} x reps {args.reps})")
        print(f"latency ms: p50 {p50:.3f}  p95 {p95:.3f}  p99 {p99:.3f}")
        print(f"resident bytes: {resident}")
        print(f"storage ratio vs flat f32: {report['storage_ratio']:.4f}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .gateway import ServiceConfig, create_app

    config = ServiceConfig.from_file(args.config)
    app = create_app(config)
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    except OSError as exc:
        print(f"bind failure: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="medaide", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert CSV/JSONL corpora into refined instruction JSONL")
    p.add_argument("inputs", nargs="+", help="CSV or JSONL input files")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument("--registry", help="source registry JSON for per-source stats")
    p.add_argument("--disease-column", default="Disease")
    p.add_argument("--source-tag", help="source tag override (single input only)")
    p.add_argument("--no-header", action="store_true", help="inputs have no header row")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-index", help="chunk, embed and index documents from a directory")
    p.add_argument("--docs", required=True, help="directory of .txt/.md documents")
    p.add_argument("--out", required=True, help="output index path")
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default="flat")
    p.add_argument("--size", type=int, default=1000, help="chunk size in characters")
    p.add_argument("--overlap", type=int, default=50, help="chunk overlap in characters")
    p.add_argument("--dims", type=int, default=384)
    p.add_argument("--metric", choices=[m.value for m in Metric], default="cosine")
    p.add_argument("--clip", type=float, default=0.999, help="calibration clip quantile")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("query", help="search an index")
    p.add_argument("query")
    p.add_argument("--index", required=True)
    p.add_argument("--chunks", help="chunk dump path (default: <index>.chunks.jsonl)")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("select", help="rank model variants for a hardware profile")
    p.add_argument("--profile", required=True, help="hardware profile JSON file")
    p.add_argument("--catalog", help="model catalog JSON (default: built-in)")
    p.add_argument("--mode", choices=["realtime", "accuracy"], default="accuracy")
    p.add_argument("--overhead", type=float, default=0.2)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("bench", help="measure search latency and storage on an index")
    p.add_argument("--index", required=True)
    p.add_argument("--chunks")
    p.add_argument("--queries", required=True, help="text file, one query per line")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP gateway")
    p.add_argument("--config", required=True, help="service config JSON")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MedaideError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
