import json
import random
from datetime import date
from pathlib import Path

import pytest

from finrag import RagPipeline, ScriptedCompleter, assemble_context, build_prompt, estimate_tokens
from finrag.errors import EmptyQuestion
from finrag.gateway import INSUFFICIENT_CONTEXT
from finrag.passages import Passage

from conftest import APPLE_QUESTION, build_searchable

GOLDEN_DIR = Path(__file__).parent / "golden"


def text_passage(i: int, text: str) -> Passage:
    return Passage(
        id=f"p{i}", ticker="AAA", period=date(2023, 3, 31), text=text, facts=(("X", 1.0),)
    )


# --- assemble_context -----------------------------------------------------------

def test_single_passage_included_verbatim():
    passage = text_passage(0, "y" * 400)  # 100 tokens
    assert assemble_context([passage], budget=1024) == passage.text


def test_five_equal_passages_greedy_prefix():
    # each passage is exactly 300 tokens (1200 chars); with blank-line
    # separators ranks 1-3 total 901 tokens and rank 4 would push past 1024
    passages = [text_passage(i, chr(ord("a") + i) * 1200) for i in range(5)]
    context = assemble_context(passages, budget=1024)
    assert context == "\n\n".join(p.text for p in passages[:3])
    assert estimate_tokens(context) <= 1024


def test_empty_input_gives_empty_context():
    assert assemble_context([], budget=1024) == ""


def test_oversized_passage_skipped_smaller_later_one_included():
    passages = [text_passage(0, "a" * 8000), text_passage(1, "b" * 40)]
    assert assemble_context(passages, budget=100) == passages[1].text


def test_budget_safety_random_passage_sets():
    rng = random.Random(99)
    for _ in range(200):
        passages = [
            text_passage(i, "t" * rng.randint(1, 6000))
            for i in range(rng.randint(0, 12))
        ]
        context = assemble_context(passages, budget=1024)
        assert estimate_tokens(context) <= 1024
        for chunk in context.split("\n\n"):
            if chunk:
                assert chunk in [p.text for p in passages]  # never cut mid-passage


# --- build_prompt -----------------------------------------------------------

def test_baseline_prompt_is_question_alone():
    messages = build_prompt("q?", "", "baseline")
    assert len(messages) == 2
    assert messages[0]["role"] == "system"
    assert messages[1] == {"role": "user", "content": "q?"}


def test_rag_prompt_has_context_before_question():
    messages = build_prompt("q?", "CTX", "rag")
    user = messages[1]["content"]
    assert user.index("CTX") < user.index("q?")


def test_prompt_matches_golden_files():
    question = "What was Apple Inc.'s Revenue for the quarter ending 2023-03-31?"
    context = "For the quarter ending 2023-03-31, Apple Inc. (AAPL) reported Revenue of 100000000 USD."
    for mode, ctx in (("rag", context), ("baseline", "")):
        golden = json.loads((GOLDEN_DIR / f"prompt_{mode}.json").read_text(encoding="utf-8"))
        assert build_prompt(question, ctx, mode) == golden


def test_empty_question_rejected():
    with pytest.raises(EmptyQuestion):
        build_prompt("   ", "ctx", "rag")


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        build_prompt("q?", "", "chatty")


# --- answer_query -----------------------------------------------------------

def test_rag_answers_from_index(apple_record):
    index, passages, embedder = build_searchable([apple_record])
    pipeline = RagPipeline(ScriptedCompleter(), index=index, embedder=embedder, passages=passages)
    result = pipeline.answer(APPLE_QUESTION, mode="rag")
    assert result.answer == "100000000"
    assert result.retrieved[0].id == "AAPL:2023-03-31"
    assert result.retrieved[0].rank == 1
    assert result.mode == "rag"


def test_baseline_same_question_gets_no_context(apple_record):
    index, passages, embedder = build_searchable([apple_record])
    pipeline = RagPipeline(ScriptedCompleter(), index=index, embedder=embedder, passages=passages)
    result = pipeline.answer(APPLE_QUESTION, mode="baseline")
    assert result.answer == INSUFFICIENT_CONTEXT
    assert result.retrieved == []
    assert result.context == ""


def test_rag_over_empty_index_proceeds(apple_record):
    from finrag import LocalHashEmbedder, VectorIndex

    pipeline = RagPipeline(
        ScriptedCompleter(), index=VectorIndex(384), embedder=LocalHashEmbedder(384), passages=[]
    )
    result = pipeline.answer(APPLE_QUESTION, mode="rag")
    assert result.retrieved == []
    assert result.context == ""
    assert result.answer == INSUFFICIENT_CONTEXT


def test_latency_breakdown_components(gold_setup):
    index, passages, embedder, records = gold_setup
    pipeline = RagPipeline(ScriptedCompleter(), index=index, embedder=embedder, passages=passages)
    result = pipeline.answer(f"What was {records[0].company}'s {records[0].indicator} "
                             f"for the quarter ending 2023-03-31?", mode="rag")
    latency = result.latency
    assert latency.total_ms >= latency.embed_ms
    assert latency.total_ms >= latency.search_ms
    assert latency.total_ms >= latency.llm_ms
    assert latency.embed_ms > 0
    assert latency.search_ms > 0


def test_budget_limits_context(gold_setup):
    index, passages, embedder, records = gold_setup
    pipeline = RagPipeline(
        ScriptedCompleter(), index=index, embedder=embedder, passages=passages, context_budget=1024
    )
    result = pipeline.answer("Revenue for the quarter ending 2023-03-31?", mode="rag", k=50)
    assert estimate_tokens(result.context) <= 1024


def test_rank_preservation(gold_setup):
    index, passages, embedder, records = gold_setup
    pipeline = RagPipeline(ScriptedCompleter(), index=index, embedder=embedder, passages=passages)
    question = f"What was {records[3].company}'s {records[3].indicator} for the quarter ending 2023-03-31?"
    result = pipeline.answer(question, mode="rag")
    by_id = {p.id: p for p in passages}
    expected_context = "\n\n".join(by_id[h.id].text for h in result.retrieved)
    assert result.context == expected_context
    assert [h.rank for h in result.retrieved] == sorted(h.rank for h in result.retrieved)


def test_mode_separation_baseline_ignores_index(gold_setup, apple_record):
    full_index, passages, embedder, _ = gold_setup
    small_index, small_passages, small_embedder = build_searchable([apple_record])
    question = "What was anything's Revenue for the quarter ending 2023-03-31?"
    a = RagPipeline(ScriptedCompleter(), index=full_index, embedder=embedder,
                    passages=passages).answer(question, mode="baseline")
    b = RagPipeline(ScriptedCompleter(), index=small_index, embedder=small_embedder,
                    passages=small_passages).answer(question, mode="baseline")
    assert a.answer == b.answer
    assert a.context == b.context == ""


def test_determinism_modulo_latency(gold_setup):
    index, passages, embedder, records = gold_setup
    pipeline = RagPipeline(ScriptedCompleter(), index=index, embedder=embedder, passages=passages)
    question = f"What was {records[9].company}'s {records[9].indicator} for the quarter ending 2023-03-31?"
    first = pipeline.answer(question, mode="rag").to_dict()
    second = pipeline.answer(question, mode="rag").to_dict()
    first.pop("latency_ms")
    second.pop("latency_ms")
    assert first == second


def test_rag_requires_index_and_embedder():
    pipeline = RagPipeline(ScriptedCompleter())
    with pytest.raises(ValueError):
        pipeline.answer("q?", mode="rag")


def test_query_result_serialization(gold_setup):
    index, passages, embedder, records = gold_setup
    pipeline = RagPipeline(ScriptedCompleter(), index=index, embedder=embedder, passages=passages)
    payload = pipeline.answer("anything for the quarter ending 2023-03-31?", mode="rag").to_dict()
    assert set(payload) == {"question", "mode", "retrieved", "context", "answer", "latency_ms"}
    assert set(payload["latency_ms"]) == {"embed", "search", "llm", "total"}
    for hit in payload["retrieved"]:
        assert set(hit) == {"id", "score", "rank"}
    json.dumps(payload)  # must be JSON-serializable as-is
