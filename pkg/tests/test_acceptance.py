"""Acceptance suite: one test per acceptance criterion, each printing a
PASS line when it completes. Criterion 8 (performance threshold) is marked
"perf" and runs via `pytest -m perf`.
"""

import io
import json
import random
import time
from datetime import date

import numpy as np
import pytest
import requests

from finrag import (
    FinRecord,
    RagPipeline,
    ScriptedCompleter,
    VectorIndex,
    assemble_context,
    estimate_tokens,
    normalize_date,
    parse_amount,
    parse_record,
    run_groups,
    standard_groups,
    synthesize_qa,
    write_records_jsonl,
)
from finrag.cli import main
from finrag.errors import CorruptIndex, MissingValue
from finrag.passages import Passage

from conftest import build_searchable, make_distractor_records, make_gold_records
from fakes import FakeUpstream
from oracle import naive_top_k


def _announce(criterion: str, detail: str = ""):
    suffix = f" ({detail})" if detail else ""
    print(f"ACCEPTANCE {criterion}: PASS{suffix}")


# --- criterion 1: oracle equivalence of search ------------------------------------

def test_c1_search_matches_oracle_exhaustively():
    started = time.perf_counter()
    checked = 0
    for n in (10, 100, 1_000, 10_000):
        for dim in (8, 384):
            rng = np.random.default_rng(hash((n, dim)) % 2**32)
            matrix = rng.standard_normal((n, dim)).astype(np.float32)
            ids = [f"v{i:05d}" for i in range(n)]
            index = VectorIndex(dim)
            index.add_many(ids, matrix)
            for _ in range(50):
                query = rng.standard_normal(dim).astype(np.float32)
                expected_full = naive_top_k(matrix, ids, query, n)
                for k in (1, 5, n, n + 3):
                    hits = index.search_top_k(query, k)
                    expected = expected_full[: min(k, n)]
                    assert [(h.id, h.rank) for h in hits] == [
                        (i, r) for i, _, r in expected
                    ], f"mismatch at n={n} dim={dim} k={k}"
                    for hit, (_, score, _) in zip(hits, expected):
                        assert hit.score == pytest.approx(score, rel=1e-6)
                    checked += 1
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"oracle equivalence took {elapsed:.1f}s (budget 60s)"
    _announce("C1 oracle equivalence", f"{checked} searches in {elapsed:.1f}s")


# --- criterion 2: directional group comparison ------------------------------------

def test_c2_rag_groups_beat_baselines_exactly():
    started = time.perf_counter()
    records = make_gold_records(50)
    index, passages, embedder = build_searchable(records)
    items = synthesize_qa(records, n=50, seed=7)
    assert {item.gold_passage_id for item in items} <= set(index.ids)

    groups = standard_groups()
    report = run_groups(
        [groups["BG"], groups["REG"], groups["VUG"], groups["FOG"]],
        items, index=index, embedder=embedder, passages=passages, seed=7,
    )
    accuracy = {g.config.name: g.metrics.accuracy for g in report.groups}
    assert accuracy["REG"] == 1.0
    assert accuracy["FOG"] == 1.0
    assert accuracy["BG"] == 0.0
    assert accuracy["VUG"] == 0.0
    elapsed = time.perf_counter() - started
    assert elapsed < 30.0, f"directional run took {elapsed:.1f}s (budget 30s)"
    _announce("C2 directional comparison", f"rag=1.00 baseline=0.00 in {elapsed:.1f}s")


# --- criterion 3: retrieval recall ------------------------------------

def test_c3_retrieval_recall_with_and_without_distractors():
    records = make_gold_records(50)
    items = synthesize_qa(records, n=50, seed=7)
    groups = standard_groups()

    index, passages, embedder = build_searchable(records)
    report = run_groups([groups["REG"]], items, index=index, embedder=embedder,
                        passages=passages, k=5)
    pure_recall = report.groups[0].metrics.retrieval_recall
    assert pure_recall == 1.0

    noisy = records + make_distractor_records(500)
    noisy_index, noisy_passages, noisy_embedder = build_searchable(noisy)
    assert noisy_index.count == 550
    noisy_report = run_groups([groups["REG"]], items, index=noisy_index,
                              embedder=noisy_embedder, passages=noisy_passages, k=5)
    noisy_recall = noisy_report.groups[0].metrics.retrieval_recall
    assert noisy_recall >= 0.90
    _announce("C3 retrieval recall", f"clean=1.00 distractors={noisy_recall:.2f}")


# --- criterion 4: normalization golden tests ------------------------------------

def test_c4_normalization_goldens():
    record = parse_record({
        "period": "2023/3/31",
        "company": "Apple Inc.",
        "tickers": "AAPL",
        "indicator": "Revenue",
        "amount": "100000000",
    })
    assert record == FinRecord(date(2023, 3, 31), "Apple Inc.", "AAPL", "Revenue", 100000000.0)

    assert parse_amount("100000000") == 100000000.0
    assert parse_amount("$1,234.50") == 1234.50
    assert parse_amount("(2,500)") == -2500.0
    with pytest.raises(MissingValue):
        parse_amount("")

    assert normalize_date("2023/3/31") == date(2023, 3, 31)
    assert normalize_date("2023-03-31") == date(2023, 3, 31)
    from finrag.errors import InvalidDate

    with pytest.raises(InvalidDate):
        normalize_date("2023/13/01")
    _announce("C4 normalization goldens")


# --- criterion 5: budget safety ------------------------------------

def test_c5_context_budget_never_exceeded_never_truncates():
    rng = random.Random(2024)
    period = date(2023, 3, 31)
    for round_number in range(1000):
        texts = [
            "w" * rng.randint(1, 6000) for _ in range(rng.randint(0, 10))
        ]
        passages = [
            Passage(id=f"p{i}", ticker="AAA", period=period, text=t, facts=(("F", 1.0),))
            for i, t in enumerate(texts)
        ]
        context = assemble_context(passages, budget=1024)
        assert estimate_tokens(context) <= 1024, f"budget exceeded on round {round_number}"
        if context:
            for chunk in context.split("\n\n"):
                assert chunk in texts, "passage truncated mid-text"
    _announce("C5 budget safety", "1000 random passage sets")


# --- criterion 6: persistence ------------------------------------

def test_c6_persistence_round_trip_and_corruption():
    rng = np.random.default_rng(6)
    matrix = rng.standard_normal((1000, 48)).astype(np.float32)
    index = VectorIndex(48)
    index.add_many([f"p{i:04d}" for i in range(1000)], matrix)

    sink = io.BytesIO()
    index.save(sink)
    loaded = VectorIndex.load(io.BytesIO(sink.getvalue()))
    resaved = io.BytesIO()
    loaded.save(resaved)
    assert resaved.getvalue() == sink.getvalue()
    assert loaded.matrix.tobytes() == index.matrix.tobytes()
    assert loaded.ids == index.ids

    for _ in range(20):
        query = rng.standard_normal(48)
        assert [
            (h.id, h.score, h.rank) for h in index.search_top_k(query, 5)
        ] == [(h.id, h.score, h.rank) for h in loaded.search_top_k(query, 5)]

    corrupted = bytearray(sink.getvalue())
    corrupted[-2] ^= 0x40  # a checksum byte
    with pytest.raises(CorruptIndex):
        VectorIndex.load(io.BytesIO(bytes(corrupted)))
    _announce("C6 persistence", "bit-identical round trip; corruption rejected")


# --- criterion 7: determinism of full eval runs ------------------------------------

def _strip_latency(node):
    if isinstance(node, dict):
        return {k: _strip_latency(v) for k, v in node.items() if "latency" not in k}
    if isinstance(node, list):
        return [_strip_latency(v) for v in node]
    return node


def test_c7_eval_runs_byte_identical_minus_latency(tmp_path):
    records_path = tmp_path / "records.jsonl"
    with open(records_path, "wb") as sink:
        write_records_jsonl(make_gold_records(50), sink)
    index_path = tmp_path / "fund.frix"
    assert main(["index", str(records_path), str(index_path)]) == 0

    stripped = []
    for run in ("run1", "run2"):
        out_dir = tmp_path / run
        assert main([
            "eval", "--records", str(records_path), "--index", str(index_path),
            "--n", "50", "--seed", "99", "--groups", "BG,REG,VUG,FOG",
            "--out", str(out_dir),
        ]) == 0
        report = json.loads((out_dir / "report.json").read_text(encoding="utf-8"))
        stripped.append(
            json.dumps(_strip_latency(report), sort_keys=True).encode("utf-8")
        )
    assert stripped[0] == stripped[1]
    _announce("C7 determinism", "reports byte-identical after latency removal")


# --- criterion 8: performance target (perf mode only) ------------------------------------

@pytest.mark.perf
def test_c8_top5_latency_100k_384():
    from threadpoolctl import threadpool_limits

    rng = np.random.default_rng(8)
    index = VectorIndex(384)
    index.add_many(
        [f"v{i:06d}" for i in range(100_000)],
        rng.standard_normal((100_000, 384)).astype(np.float32),
    )
    queries = rng.standard_normal((20, 384)).astype(np.float32)
    with threadpool_limits(limits=1):
        index.search_top_k(queries[0], 5)  # warm the matrix cache
        samples = []
        for query in queries:
            started = time.perf_counter()
            index.search_top_k(query, 5)
            samples.append((time.perf_counter() - started) * 1000.0)
    samples.sort()
    p50 = samples[len(samples) // 2]
    assert p50 <= 100.0, f"median per-query latency {p50:.1f}ms exceeds 100ms"
    _announce("C8 performance", f"p50={p50:.1f}ms max={samples[-1]:.1f}ms single-threaded")


# --- criterion 9: service contract ------------------------------------

def test_c9_service_contract(gold_setup):
    import threading

    index, passages, embedder, records = gold_setup

    # cases 1-3 plus the burst run against the scripted completer
    pipeline = RagPipeline(ScriptedCompleter(), index=index, embedder=embedder, passages=passages)
    from finrag.service import create_server

    server = create_server("127.0.0.1:0", pipeline)
    thread = threading.Thread(target=lambda: server.serve_forever(poll_interval=0.05), daemon=True)
    thread.start()
    host, port = server.server_address[:2]
    base = f"http://{host}:{port}"
    try:
        assert requests.get(f"{base}/v1/health", timeout=5).status_code == 200

        record = records[0]
        question = (
            f"What was {record.company}'s {record.indicator} "
            f"for the quarter ending {record.period.isoformat()}?"
        )
        ok = requests.post(f"{base}/v1/query", json={"question": question}, timeout=5)
        assert ok.status_code == 200
        assert ok.json()["answer"] == str(int(record.amount))

        bad = requests.post(
            f"{base}/v1/query", data=b"{oops", headers={"Content-Type": "application/json"},
            timeout=5,
        )
        assert bad.status_code == 400

        from concurrent.futures import ThreadPoolExecutor

        items = synthesize_qa(records, n=32, seed=9)
        with ThreadPoolExecutor(max_workers=32) as pool:
            responses = list(
                pool.map(
                    lambda item: (
                        item,
                        requests.post(
                            f"{base}/v1/query", json={"question": item.question}, timeout=15
                        ),
                    ),
                    items,
                )
            )
        for item, response in responses:
            assert response.status_code == 200
            assert response.json()["answer"] == str(int(item.gold_answer))
    finally:
        server.shutdown()
        server.server_close()

    # case 4: upstream failure surfaces as 502
    from finrag.gateway import ChatCompletionsClient, ModelProfile

    with FakeUpstream() as fake:
        fake.chat_actions.extend([("status", 500)] * 3)
        failing = RagPipeline(
            ChatCompletionsClient(ModelProfile(base_url=fake.base_url, max_retries=0),
                                  retry_backoff=0.01),
            index=index, embedder=embedder, passages=passages,
        )
        server = create_server("127.0.0.1:0", failing)
        thread = threading.Thread(
            target=lambda: server.serve_forever(poll_interval=0.05), daemon=True
        )
        thread.start()
        host, port = server.server_address[:2]
        try:
            response = requests.post(
                f"http://{host}:{port}/v1/query", json={"question": "anything?"}, timeout=5
            )
            assert response.status_code == 502
        finally:
            server.shutdown()
            server.server_close()
    _announce("C9 service contract", "200/200/400/502 and 32-request burst")
