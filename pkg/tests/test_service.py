import threading
from concurrent.futures import ThreadPoolExecutor

import pytest
import requests

from finrag import ModelProfile, RagPipeline, ScriptedCompleter, synthesize_qa
from finrag.cli import main
from finrag.gateway import ChatCompletionsClient
from finrag.service import create_server

from fakes import FakeUpstream


@pytest.fixture
def served(gold_setup):
    index, passages, embedder, records = gold_setup
    pipeline = RagPipeline(ScriptedCompleter(), index=index, embedder=embedder, passages=passages)
    server = create_server("127.0.0.1:0", pipeline)
    thread = threading.Thread(target=lambda: server.serve_forever(poll_interval=0.05), daemon=True)
    thread.start()
    host, port = server.server_address[:2]
    yield f"http://{host}:{port}", records
    server.shutdown()
    server.server_close()


def test_health(served, gold_setup):
    base, _ = served
    index = gold_setup[0]
    response = requests.get(f"{base}/v1/health", timeout=5)
    assert response.status_code == 200
    assert response.json() == {"status": "ok", "index_count": index.count, "dim": 384}


def test_valid_query(served):
    base, records = served
    record = records[0]
    question = (
        f"What was {record.company}'s {record.indicator} "
        f"for the quarter ending {record.period.isoformat()}?"
    )
    response = requests.post(f"{base}/v1/query", json={"question": question}, timeout=5)
    assert response.status_code == 200
    payload = response.json()
    assert payload["answer"] == str(int(record.amount))
    assert payload["retrieved"][0]["id"] == f"{record.ticker}:{record.period.isoformat()}"


def test_baseline_mode_via_service(served):
    base, records = served
    response = requests.post(
        f"{base}/v1/query",
        json={"question": "What was anything?", "mode": "baseline"},
        timeout=5,
    )
    assert response.status_code == 200
    assert response.json()["answer"] == "INSUFFICIENT CONTEXT"


@pytest.mark.parametrize(
    "body",
    [b"{", b"[]", b"{}", b'{"question": ""}', b'{"question": 5}',
     b'{"question": "q", "mode": "nope"}', b'{"question": "q", "k": 0}'],
)
def test_malformed_bodies_get_400(served, body):
    base, _ = served
    response = requests.post(
        f"{base}/v1/query", data=body, headers={"Content-Type": "application/json"}, timeout=5
    )
    assert response.status_code == 400
    assert "error" in response.json()


def test_unknown_paths_get_404(served):
    base, _ = served
    assert requests.get(f"{base}/v1/nothing", timeout=5).status_code == 404
    assert requests.post(f"{base}/v1/nothing", json={}, timeout=5).status_code == 404


def test_upstream_failure_maps_to_502(gold_setup):
    index, passages, embedder, records = gold_setup
    with FakeUpstream() as fake:
        fake.chat_actions.extend([("status", 500)] * 5)
        completer = ChatCompletionsClient(
            ModelProfile(base_url=fake.base_url, max_retries=0), retry_backoff=0.01
        )
        pipeline = RagPipeline(completer, index=index, embedder=embedder, passages=passages)
        server = create_server("127.0.0.1:0", pipeline)
        thread = threading.Thread(
            target=lambda: server.serve_forever(poll_interval=0.05), daemon=True
        )
        thread.start()
        host, port = server.server_address[:2]
        try:
            response = requests.post(
                f"http://{host}:{port}/v1/query", json={"question": "anything?"}, timeout=5
            )
        finally:
            server.shutdown()
            server.server_close()
    assert response.status_code == 502
    assert "error" in response.json()


def test_concurrent_burst_returns_correct_answers(served):
    base, records = served
    items = synthesize_qa(records, n=32, seed=8)

    def ask(item):
        response = requests.post(f"{base}/v1/query", json={"question": item.question}, timeout=15)
        return item, response

    with ThreadPoolExecutor(max_workers=32) as pool:
        outcomes = list(pool.map(ask, items))
    for item, response in outcomes:
        assert response.status_code == 200
        assert response.json()["answer"] == str(int(item.gold_answer))


def test_health_count_constant_for_lifetime(served):
    base, _ = served
    first = requests.get(f"{base}/v1/health", timeout=5).json()["index_count"]
    second = requests.get(f"{base}/v1/health", timeout=5).json()["index_count"]
    assert first == second


def test_serve_startup_failure_bad_index(tmp_path, capsys):
    bad = tmp_path / "broken.frix"
    bad.write_bytes(b"not an index at all")
    assert main(["serve", "--index", str(bad), "--bind", "127.0.0.1:0"]) == 2
    assert "startup failed" in capsys.readouterr().err


def test_serve_startup_failure_bad_bind():
    with pytest.raises(ValueError):
        create_server("nonsense", RagPipeline(ScriptedCompleter()))


def test_bind_conflict_raises_before_serving(gold_setup):
    index, passages, embedder, _ = gold_setup
    pipeline = RagPipeline(ScriptedCompleter(), index=index, embedder=embedder, passages=passages)
    first = create_server("127.0.0.1:0", pipeline)
    host, port = first.server_address[:2]
    try:
        with pytest.raises(OSError):
            create_server(f"{host}:{port}", pipeline)
    finally:
        first.server_close()
