"""End-to-end query path: embed the question, retrieve, budget the context,
build the prompt, and complete.

Baseline mode skips retrieval entirely, so baseline answers are independent
of index contents; that separation is what the evaluation harness measures.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

from .errors import EmptyQuestion
from .gateway import estimate_tokens
from .index import SearchHit, VectorIndex
from .passages import Passage

DEFAULT_TOP_K = 5
DEFAULT_CONTEXT_BUDGET = 1024

BASELINE_SYSTEM_PROMPT = "You are a financial analysis assistant."
RAG_SYSTEM_PROMPT = "Answer strictly from the provided context."

MODES = ("baseline", "rag")


@dataclass
class LatencyBreakdown:
    embed_ms: float = 0.0
    search_ms: float = 0.0
    llm_ms: float = 0.0
    total_ms: float = 0.0

    def to_dict(self) -> dict:
        return {
            "embed": self.embed_ms,
            "search": self.search_ms,
            "llm": self.llm_ms,
            "total": self.total_ms,
        }


@dataclass
class QueryResult:
    """Answer plus everything needed to audit how it was produced."""

    question: str
    mode: str
    retrieved: list[SearchHit]
    context: str
    answer: str
    latency: LatencyBreakdown = field(default_factory=LatencyBreakdown)

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "mode": self.mode,
            "retrieved": [hit.to_dict() for hit in self.retrieved],
            "context": self.context,
            "answer": self.answer,
            "latency_ms": self.latency.to_dict(),
        }


def assemble_context(passages: Sequence[Passage], budget: int = DEFAULT_CONTEXT_BUDGET) -> str:
    """Greedily concatenate passage texts in rank order under a token budget.

    A passage joins only if the blank-line-separated running text stays
    within budget; passages that do not fit are dropped whole (never
    truncated mid-text) and later, smaller passages may still join in their
    original order.
    """
    kept: list[str] = []
    for passage in passages:
        candidate = kept + [passage.text]
        if estimate_tokens("\n\n".join(candidate)) <= budget:
            kept = candidate
    return "\n\n".join(kept)


def build_prompt(question: str, context: str, mode: str) -> list[dict]:
    """Fixed two-message prompt; byte-deterministic for fixed inputs."""
    if not question.strip():
        raise EmptyQuestion("question is empty")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if mode == "rag":
        system = RAG_SYSTEM_PROMPT
        user = f"Context:\n{context}\n\nQuestion: {question}"
    else:
        system = BASELINE_SYSTEM_PROMPT
        user = question
    return [
        {"role": "system", "content": system},
        {"role": "user", "content": user},
    ]


class RagPipeline:
    """Wires an index, embedder, passage lookup, and completer into answers.

    Safe to call concurrently for distinct queries: searches take read-only
    access to the index and the embedder/completer enforce their own
    concurrency contracts.
    """

    def __init__(
        self,
        completer,
        index: VectorIndex | None = None,
        embedder=None,
        passages: Sequence[Passage] | None = None,
        k: int = DEFAULT_TOP_K,
        context_budget: int = DEFAULT_CONTEXT_BUDGET,
    ):
        self.completer = completer
        self.index = index
        self.embedder = embedder
        self.k = k
        self.context_budget = context_budget
        self._passages_by_id = {p.id: p for p in passages or []}

    def answer(self, question: str, mode: str = "rag", k: int | None = None) -> QueryResult:
        """Run one query; rag mode retrieves, baseline goes straight to the model."""
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
        top_k = self.k if k is None else k
        latency = LatencyBreakdown()
        started = time.perf_counter()

        hits: list[SearchHit] = []
        context = ""
        if mode == "rag":
            if self.index is None or self.embedder is None:
                raise ValueError("rag mode requires an index and an embedder")
            t0 = time.perf_counter()
            query_vector = self.embedder.embed_texts([question])[0]
            latency.embed_ms = (time.perf_counter() - t0) * 1000.0
            t0 = time.perf_counter()
            hits = self.index.search_top_k(query_vector, top_k)
            latency.search_ms = (time.perf_counter() - t0) * 1000.0
            ranked = [
                self._passages_by_id[hit.id] for hit in hits if hit.id in self._passages_by_id
            ]
            context = assemble_context(ranked, self.context_budget)

        messages = build_prompt(question, context, mode)
        t0 = time.perf_counter()
        exchange = self.completer.complete(messages)
        latency.llm_ms = (time.perf_counter() - t0) * 1000.0
        latency.total_ms = (time.perf_counter() - started) * 1000.0
        return QueryResult(
            question=question,
            mode=mode,
            retrieved=hits,
            context=context,
            answer=exchange.answer,
            latency=latency,
        )
