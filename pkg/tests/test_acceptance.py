"""Acceptance suite.

One test per acceptance criterion, each printing a pass line with its
number (run with -s, or rely on -v test names). Tolerances and expected
values are fixed here, not computed from the code under test: reference
results come from the brute-force oracle, closed-form span enumeration,
and hand-derived arithmetic.
"""

import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from medaide.chunking import ChunkParams, split_into_chunks
from medaide.cli import main as cli_main
from medaide.embedding import ReferenceEmbedder
from medaide.gateway.service import create_app
from medaide.index import Metric, Scheme, brute_force_oracle, build_flat, search
from medaide.index_io import CorruptPayload, deserialize_index, load_index, save_index, serialize_index
from medaide.ingest import make_record, parse_csv, csv_to_instruction, read_jsonl, refine, write_jsonl
from medaide.modelselect import (
    INSUFFICIENT_MEMORY,
    Q4_UNSUPPORTED,
    Quant,
    default_catalog,
    preset_profiles,
    rank_candidates,
)
from medaide.quantize import dequantize, quantize_index, search_quantized
from medaide.rag import MockBackend, chat_turn

from conftest import AUTH, TINY_DOCS, make_config, write_docs


def _pass(number: int, label: str) -> None:
    print(f"[criterion {number:02d}] PASS - {label}")


def test_criterion_01_flat_search_equals_oracle():
    """Flat search must return the oracle's exact id sequence everywhere."""
    rng = np.random.default_rng(7)
    started = time.perf_counter()
    mismatches = 0
    searches = 0
    for dims in (2, 32, 128):
        for count in (1, 10, 137, 1000):
            for metric in (Metric.L2, Metric.COSINE):
                vecs = rng.standard_normal((count, dims))
                if metric is Metric.COSINE:
                    vecs = vecs / np.linalg.norm(vecs, axis=1, keepdims=True)
                vecs = vecs.astype(np.float32)
                ids = [f"x{i:04d}" for i in range(count)]
                index = build_flat(ids, vecs, metric=metric)
                for k in (1, 2, 5):
                    for _ in range(8):
                        q = rng.standard_normal(dims)
                        got = [h.id for h in search(index, q, k=k)]
                        want = [h.id for h in brute_force_oracle(ids, vecs, q, metric, k=k)]
                        searches += 1
                        if got != want:
                            mismatches += 1
    elapsed = time.perf_counter() - started
    assert mismatches == 0
    assert elapsed < 30.0
    _pass(1, f"oracle equivalence over {searches} searches in {elapsed:.1f}s, 0 mismatches")


def test_criterion_02_q8_reconstruction_error_bound():
    """With no clipping, every coordinate reconstructs within scale/2."""
    rng = np.random.default_rng(13)
    vecs = rng.standard_normal((1000, 64)).astype(np.float32)
    index = build_flat([f"v{i:04d}" for i in range(1000)], vecs, metric=Metric.L2)
    qindex = quantize_index(index, scheme=Scheme.Q8, clip_quantile=1.0)
    err = np.abs(dequantize(qindex) - vecs.astype(np.float64))
    bound = qindex.scale.astype(np.float64) / 2 + 1e-12
    violations = int(np.sum(err > bound))
    assert violations == 0
    _pass(2, f"Q8 reconstruction error <= scale/2 on {vecs.shape[0]} vectors, 0 violations")


def test_criterion_03_quantized_recall_thresholds():
    """Recall@2 vs flat on 5000 seeded Gaussian vectors, dim 128, 200 queries.

    Queries are corpus points perturbed with Gaussian noise (sigma 0.3),
    modeling retrieval queries that resemble indexed content. Thresholds
    0.95 / 0.80 were fixed from an oracle measurement of this exact setup
    (measured 0.9925 / 0.8825).
    """
    rng = np.random.default_rng(42)
    base = rng.standard_normal((5000, 128)).astype(np.float32)
    ids = [f"v{i:05d}" for i in range(5000)]
    pick = rng.choice(5000, size=200, replace=False)
    queries = base[pick] + 0.3 * rng.standard_normal((200, 128)).astype(np.float32)

    flat = build_flat(ids, base, metric=Metric.L2)
    exact = [frozenset(h.id for h in search(flat, q, k=2)) for q in queries]

    def recall(scheme: Scheme) -> float:
        qidx = quantize_index(flat, scheme=scheme, clip_quantile=0.999)
        hits = [frozenset(h.id for h in search_quantized(qidx, q, k=2)) for q in queries]
        return sum(len(e & a) for e, a in zip(exact, hits)) / (2 * len(exact))

    recall_q8 = recall(Scheme.Q8)
    recall_q4 = recall(Scheme.Q4)
    assert recall_q8 >= 0.95
    assert recall_q4 >= 0.80
    assert recall_q8 >= recall_q4
    _pass(3, f"recall@2: Q8 {recall_q8:.4f} >= 0.95, Q4 {recall_q4:.4f} >= 0.80, Q8 >= Q4")


def test_criterion_04_storage_ratios(tmp_path, capsys):
    """Q8 codes are exactly 25% of flat f32 bytes, Q4 exactly 12.5%."""
    rng = np.random.default_rng(5)
    count, dims = 300, 128
    vecs = rng.standard_normal((count, dims)).astype(np.float32)
    flat = build_flat([f"v{i:04d}" for i in range(count)], vecs, metric=Metric.L2)
    flat_bytes = flat.vectors.nbytes
    assert flat_bytes == count * dims * 4
    q8 = quantize_index(flat, scheme=Scheme.Q8)
    q4 = quantize_index(flat, scheme=Scheme.Q4)
    assert q8.code_bytes == count * dims
    assert q4.code_bytes == count * ((dims + 1) // 2)
    assert q8.code_bytes / flat_bytes == 0.25
    assert q4.code_bytes / flat_bytes == 0.125

    # cli_bench must report the same ratios
    docs = tmp_path / "docs"
    docs.mkdir()
    for doc_id, text in TINY_DOCS.items():
        (docs / f"{doc_id}.txt").write_text(text, encoding="utf-8")
    queries = tmp_path / "queries.txt"
    queries.write_text("aspirin\nfracture\n")
    ratios = {}
    for scheme, expected in (("q8", 0.25), ("q4", 0.125)):
        out = tmp_path / f"{scheme}.maix"
        assert cli_main(
            ["build-index", "--docs", str(docs), "--out", str(out), "--dims", "64", "--scheme", scheme]
        ) == 0
        assert cli_main(["bench", "--index", str(out), "--queries", str(queries), "--reps", "1", "--json"]) == 0
        report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        ratios[scheme] = report["storage_ratio"]
        assert report["storage_ratio"] == pytest.approx(expected)
        assert report["p50_ms"] <= report["p95_ms"] <= report["p99_ms"]
    _pass(4, f"storage ratios exact: Q8 {ratios['q8']}, Q4 {ratios['q4']}; bench reports match")


def test_criterion_05_chunker_closed_form():
    """Chunk spans follow the closed form over 1000 fuzzed (length, params)."""
    # the two named cases first
    one = split_into_chunks("d", "x" * 1000)
    assert [(c.char_start, c.char_end) for c in one] == [(0, 1000)]
    two = split_into_chunks("d", "x" * 1950)
    assert [(c.char_start, c.char_end) for c in two] == [(0, 1000), (950, 1950)]
    assert two[0].char_end - two[1].char_start == 50  # the 50-char overlap

    rng = np.random.default_rng(99)
    cases = 0
    while cases < 1000:
        size = int(rng.integers(1, 1500))
        overlap = int(rng.integers(0, size))
        length = int(rng.integers(0, 6000))
        stride = size - overlap
        params = ChunkParams(size_chars=size, overlap_chars=overlap)
        chunks = split_into_chunks("d", "x" * length, params)
        # closed-form chunk count
        if length == 0:
            expected_count = 0
        elif length <= size:
            expected_count = 1
        else:
            expected_count = 1 + -(-(length - size) // stride)  # ceil division
        assert len(chunks) == expected_count, (length, size, overlap)
        if chunks:
            # closed-form spans, coverage, and the overlap law
            assert chunks[0].char_start == 0
            assert chunks[-1].char_end == length
            for i, c in enumerate(chunks):
                assert c.char_start == i * stride
                assert c.char_end == min(i * stride + size, length)
            for a, b in zip(chunks, chunks[1:]):
                assert a.char_end - b.char_start == overlap or b is chunks[-1]
                assert b.char_start <= a.char_end  # no gaps
        cases += 1
    _pass(5, f"chunker matches closed form on {cases} fuzzed cases plus boundary cases")


def test_criterion_06_selector_table():
    """Jetson rejects Q4 variants and 7B-F16; the 16 GB GPU picks per mode."""
    catalog = default_catalog()
    presets = preset_profiles()
    jetson = presets["jetson-8gb"]
    gpu16 = presets["consumer-gpu-16gb"]

    jetson_result = rank_candidates(jetson, catalog, mode="accuracy")
    by_name = {e.spec.name: e for e in jetson_result.ranked}
    q4_names = [s.name for s in catalog if s.quant is Quant.Q4]
    assert q4_names
    for name in q4_names:
        assert Q4_UNSUPPORTED in by_name[name].violations
    f16_entry = by_name["LLaMa2-7B-F16"]
    assert INSUFFICIENT_MEMORY in f16_entry.violations  # 14 GB base > 8 GB budget

    accuracy = rank_candidates(gpu16, catalog, mode="accuracy")
    assert accuracy.chosen is not None
    assert accuracy.chosen.name == "LLaMa2-7B-Q8"

    realtime = rank_candidates(gpu16, catalog, mode="realtime")
    assert realtime.chosen is not None
    assert realtime.chosen.name.startswith("OPT-125M")
    _pass(6, "selector: Jetson rejects Q4 + 7B-F16; 16GB picks LLaMa2-7B-Q8 / OPT-125M")


GOLDEN_CSV = (
    "Disease,Symptom,Reason,Tests And Procedures,Common Medications\n"
    'Panic disorder,"fear, sweating",stress,ECG,SSRIs\n'
    'Migraine,"headache, mail me at doc@example.com",unknown,MRI,triptans\n'
    "Asthma,,,,\n"
).encode("utf-8")


def test_criterion_07_ingest_golden():
    """CSV template is byte-exact; refinement drops and redacts as specified."""
    rows = parse_csv(GOLDEN_CSV)
    records = [csv_to_instruction(r, source_tag="fixture") for r in rows]
    assert [r.instruction for r in records] == [
        "What are the symptoms, reasons, tests and procedures, and common medications for Panic disorder?",
        "What are the symptoms, reasons, tests and procedures, and common medications for Migraine?",
        "What are the symptoms, reasons, tests and procedures, and common medications for Asthma?",
    ]
    # a deleted-marker record arriving from a JSONL sidecar corpus
    deleted = read_jsonl(write_jsonl([make_record("old question", "[deleted]", "fixture")]))
    kept, report = refine(records + deleted)

    assert report.kept == 2
    assert report.dropped_incomplete == 1  # Asthma row: all answer columns empty
    assert report.dropped_deleted == 1
    assert report.dropped_duplicate == 0
    assert report.dropped_pii_scrubbed == 1
    total = report.kept + report.dropped_incomplete + report.dropped_deleted + report.dropped_duplicate
    assert total == len(records) + 1

    migraine = next(r for r in kept if "Migraine" in r.instruction)
    assert "doc@example.com" not in migraine.output
    assert "mail me at [REDACTED]" in migraine.output
    _pass(7, "ingest golden: exact templates, deleted/empty dropped, email redacted, counts conserve")


def test_criterion_08_end_to_end_grounding(tmp_path, capsys):
    """Chat cites exactly the two oracle-nearest chunks, via HTTP and CLI."""
    config = make_config(tmp_path)
    write_docs(config)
    query = "does aspirin protect the heart"

    app = create_app(config)
    with TestClient(app) as client:
        assert client.post("/api/v1/index/rebuild", json={}, headers=AUTH).status_code == 200
        session_id = client.post("/api/v1/sessions", headers=AUTH).json()["session_id"]
        body = client.post(f"/api/v1/sessions/{session_id}/chat", json={"query": query}, headers=AUTH).json()
        http_citations = [c["chunk_id"] for c in body["citations"]]

        # oracle-nearest two chunks over the same index contents
        index = load_index(config.index_path)
        vec = ReferenceEmbedder(dims=config.embedder_dims).embed(query).values
        oracle_ids = [h.id for h in brute_force_oracle(index.ids, index.vectors, vec, index.metric, k=2)]
        assert http_citations == oracle_ids
        assert body["response"] == f"CTX[{','.join(oracle_ids)}] Q[{query}]"

        # second turn: the rendered prompt must carry turn 1 in its history
        captured: list[str] = []

        class SpyBackend:
            name = "spy"
            deterministic = True
            inner = MockBackend()

            def generate(self, prompt, params):
                captured.append(prompt)
                return self.inner.generate(prompt, params)

        snap = app.state.holder.get()
        session = app.state.sessions.get(session_id)
        chat_turn(session, "and what about a second opinion", snap.index, ReferenceEmbedder(64), snap.chunks, SpyBackend())
        assert "### History:" in captured[0]
        assert f"User: {query}" in captured[0]

        second = client.get(f"/api/v1/sessions/{session_id}", headers=AUTH).json()
        assert [t["user_query"] for t in second["turns"]][0] == query

    # CLI path over the same corpus and parameters gives identical citations
    out = tmp_path / "cli.maix"
    assert cli_main(
        [
            "build-index",
            "--docs", str(config.docs_dir),
            "--out", str(out),
            "--dims", str(config.embedder_dims),
            "--size", str(config.chunk_params.size_chars),
            "--overlap", str(config.chunk_params.overlap_chars),
        ]
    ) == 0
    assert cli_main(["query", query, "--index", str(out), "--json"]) == 0
    cli_body = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    cli_citations = [c["chunk_id"] for c in cli_body["citations"]]
    assert cli_citations == http_citations
    _pass(8, f"grounding: HTTP and CLI both cite oracle-nearest {http_citations}")


def test_criterion_09_persistence(tmp_path):
    """Bit-exact round trips for all schemes; corruption detected; sessions durable."""
    rng = np.random.default_rng(31)
    vecs = rng.standard_normal((40, 24)).astype(np.float32)
    flat = build_flat([f"c{i:03d}" for i in range(40)], vecs, metric=Metric.L2)
    indices = [flat, quantize_index(flat, Scheme.Q8), quantize_index(flat, Scheme.Q4)]
    for index in indices:
        blob = serialize_index(index)
        assert serialize_index(deserialize_index(blob)) == blob  # bit-exact
        path = tmp_path / "roundtrip.maix"
        save_index(index, path)
        assert path.read_bytes() == blob

    save_index(flat, tmp_path / "trunc.maix")
    data = (tmp_path / "trunc.maix").read_bytes()
    (tmp_path / "trunc.maix").write_bytes(data[:-7])
    with pytest.raises(CorruptPayload):
        load_index(tmp_path / "trunc.maix")

    config = make_config(tmp_path)
    write_docs(config)
    with TestClient(create_app(config)) as client:
        client.post("/api/v1/index/rebuild", json={}, headers=AUTH)
        session_id = client.post("/api/v1/sessions", headers=AUTH).json()["session_id"]
        client.post(f"/api/v1/sessions/{session_id}/chat", json={"query": "flu season"}, headers=AUTH)
        before = client.get(f"/api/v1/sessions/{session_id}", headers=AUTH).json()
    with TestClient(create_app(make_config(tmp_path))) as client:
        after = client.get(f"/api/v1/sessions/{session_id}", headers=AUTH).json()
    assert after == before and len(after["turns"]) == 1
    _pass(9, "persistence: bit-exact index round trips, truncation detected, sessions survive restart")


def test_criterion_10_auth(tmp_path):
    """Every non-health endpoint 401s without a valid bearer token."""
    config = make_config(tmp_path)
    write_docs(config)
    with TestClient(create_app(config)) as client:
        protected = [
            ("POST", "/api/v1/sessions", {}),
            ("GET", "/api/v1/sessions/some-id", {}),
            ("POST", "/api/v1/sessions/some-id/chat", {"json": {"query": "q"}}),
            ("GET", "/api/v1/models", {}),
            ("POST", "/api/v1/select-model", {"json": {"profile": {"device_class": "cpu_only"}, "mode": "accuracy"}}),
            ("POST", "/api/v1/index/rebuild", {"json": {}}),
        ]
        for method, path, kwargs in protected:
            bare = client.request(method, path, **kwargs)
            assert bare.status_code == 401, (method, path)
            assert bare.json()["code"] == "UNAUTHORIZED"
            wrong = client.request(method, path, headers={"Authorization": "Bearer wrong"}, **kwargs)
            assert wrong.status_code == 401, (method, path)
        assert client.get("/health").status_code == 200
        assert client.get("/api/v1/health").status_code == 200
    _pass(10, f"auth: {len(protected)} endpoints reject missing/unknown tokens; /health exempt")
