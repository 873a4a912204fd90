"""Evaluation harness: synthesize QA items from a dataset, run comparison
groups, and compute accuracy, recall, and latency statistics.

Three rates are reported and labeled explicitly: answer accuracy (any number
in the answer matches the gold amount), answer-fact recall (share of gold
fact amounts that appear in answers), and retrieval recall (share of
questions whose gold passage was retrieved; only defined for rag groups).
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass
from datetime import date
from typing import Callable, Sequence

from .errors import EvalExecutionError, FinragError, InsufficientFacts, LengthMismatch
from .gateway import (
    DEFAULT_BASE_MODEL,
    DEFAULT_ENHANCED_MODEL,
    ModelProfile,
    ScriptedCompleter,
)
from .index import VectorIndex
from .passages import Passage
from .pipeline import DEFAULT_CONTEXT_BUDGET, DEFAULT_TOP_K, QueryResult, RagPipeline
from .records import FinRecord

QUESTION_TEMPLATE = "What was {company}'s {indicator} for the quarter ending {period}?"

STANDARD_GROUP_NAMES = ("BG", "REG", "VUG", "FOG")

_NUMBER_IN_TEXT_RE = re.compile(
    r"(?P<sign>[-+])?[$€£]?\s?"
    r"(?P<digits>(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?)"
    r"(?:\s*(?P<scale>million|billion))?",
    re.IGNORECASE,
)
_SCALES = {"million": 1e6, "billion": 1e9}


@dataclass(frozen=True)
class QAItem:
    """One synthesized question with its gold fact and source passage."""

    id: str
    question: str
    gold_answer: float
    gold_facts: tuple[tuple[str, float], ...]
    gold_passage_id: str
    ticker: str
    period: date
    indicator: str


@dataclass(frozen=True)
class GroupConfig:
    """One experimental arm: a model profile with retrieval on or off."""

    name: str
    model: ModelProfile
    rag: bool


def standard_groups(
    base: ModelProfile | None = None, enhanced: ModelProfile | None = None
) -> dict[str, GroupConfig]:
    """The four built-in comparison arms keyed by name.

    BG = base model alone, REG = base model with retrieval, VUG = enhanced
    model alone, FOG = enhanced model with retrieval.
    """
    base = base or ModelProfile(name=DEFAULT_BASE_MODEL)
    enhanced = enhanced or ModelProfile(name=DEFAULT_ENHANCED_MODEL)
    return {
        "BG": GroupConfig("BG", base, rag=False),
        "REG": GroupConfig("REG", base, rag=True),
        "VUG": GroupConfig("VUG", enhanced, rag=False),
        "FOG": GroupConfig("FOG", enhanced, rag=True),
    }


@dataclass
class GroupMetrics:
    accuracy: float
    answer_fact_recall: float
    retrieval_recall: float | None
    latency_p50_ms: float
    latency_p95_ms: float
    latency_mean_ms: float
    items: int

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "answer_fact_recall": self.answer_fact_recall,
            "retrieval_recall": self.retrieval_recall,
            "items": self.items,
            "latency_ms": {
                "p50": self.latency_p50_ms,
                "p95": self.latency_p95_ms,
                "mean": self.latency_mean_ms,
            },
        }


@dataclass
class GroupOutcome:
    config: GroupConfig
    metrics: GroupMetrics
    results: list[QueryResult]


@dataclass
class EvalReport:
    """Per-group metrics plus deltas against the BG baseline group."""

    groups: list[GroupOutcome]
    items: int
    seed: int | None = None
    k: int = DEFAULT_TOP_K

    def to_dict(self) -> dict:
        baseline = next((g for g in self.groups if g.config.name == "BG"), None)
        payload = {
            "items": self.items,
            "k": self.k,
            "seed": self.seed,
            "groups": [
                {
                    "name": outcome.config.name,
                    "model": outcome.config.model.name,
                    "rag": outcome.config.rag,
                    "metrics": outcome.metrics.to_dict(),
                }
                for outcome in self.groups
            ],
            "deltas_vs_baseline": [],
        }
        if baseline is not None:
            for outcome in self.groups:
                if outcome is baseline:
                    continue
                delta = {
                    "name": outcome.config.name,
                    "accuracy_delta_points": (
                        (outcome.metrics.accuracy - baseline.metrics.accuracy) * 100.0
                    ),
                    "answer_fact_recall_delta_points": (
                        (outcome.metrics.answer_fact_recall - baseline.metrics.answer_fact_recall)
                        * 100.0
                    ),
                }
                if baseline.metrics.latency_p50_ms > 0:
                    delta["latency_p50_delta_pct"] = (
                        (outcome.metrics.latency_p50_ms - baseline.metrics.latency_p50_ms)
                        / baseline.metrics.latency_p50_ms
                        * 100.0
                    )
                else:
                    delta["latency_p50_delta_pct"] = None
                payload["deltas_vs_baseline"].append(delta)
        return payload

    def to_table(self) -> str:
        """Aligned text table: one row per group."""
        header = f"{'group':<8}{'model':<24}{'rag':<6}{'accuracy':<10}{'recall':<10}{'latency p50 (ms)':<18}"
        lines = [header, "-" * len(header)]
        for outcome in self.groups:
            m = outcome.metrics
            lines.append(
                f"{outcome.config.name:<8}"
                f"{outcome.config.model.name:<24}"
                f"{'on' if outcome.config.rag else 'off':<6}"
                f"{m.accuracy * 100:>7.1f}%  "
                f"{m.answer_fact_recall * 100:>7.1f}%  "
                f"{m.latency_p50_ms:>10.2f}"
            )
        return "\n".join(lines)


def synthesize_qa(records: Sequence[FinRecord], n: int, seed: int) -> list[QAItem]:
    """Sample n distinct facts into QA items with a seeded generator.

    Identical (records, n, seed) produce identical items regardless of
    record order.
    """
    if not records:
        raise InsufficientFacts("no records to synthesize from")
    if n < 1:
        raise ValueError("n must be >= 1")
    facts: dict[tuple[str, date, str], FinRecord] = {}
    for record in records:
        facts[record.fact_key] = record
    if len(facts) < n:
        raise InsufficientFacts(f"requested {n} items but only {len(facts)} distinct facts")
    ordered_keys = sorted(facts, key=lambda key: (key[0], key[1].isoformat(), key[2]))
    rng = random.Random(seed)
    chosen = rng.sample(ordered_keys, n)
    items = []
    for position, key in enumerate(chosen):
        record = facts[key]
        items.append(
            QAItem(
                id=f"qa-{position:04d}",
                question=QUESTION_TEMPLATE.format(
                    company=record.company,
                    indicator=record.indicator,
                    period=record.period.isoformat(),
                ),
                gold_answer=record.amount,
                gold_facts=((record.indicator, record.amount),),
                gold_passage_id=f"{record.ticker}:{record.period.isoformat()}",
                ticker=record.ticker,
                period=record.period,
                indicator=record.indicator,
            )
        )
    return items


def extract_numbers(text: str) -> list[float]:
    """Numeric literals in free text, with commas and currency symbols
    tolerated and million/billion suffixes expanded."""
    values = []
    for match in _NUMBER_IN_TEXT_RE.finditer(text):
        raw = match.group("digits").replace(",", "")
        try:
            value = float(raw)
        except ValueError:  # pragma: no cover - regex should prevent this
            continue
        scale = match.group("scale")
        if scale:
            value *= _SCALES[scale.lower()]
        if match.group("sign") == "-":
            value = -value
        values.append(value)
    return values


def judge_answer(answer: str, gold: float, rel_tol: float = 1e-6) -> bool:
    """An answer is correct iff any number it contains matches gold."""
    return any(math.isclose(value, gold, rel_tol=rel_tol) for value in extract_numbers(answer))


def _nearest_rank(sorted_values: list[float], percentile: float) -> float:
    if not sorted_values:
        return 0.0
    rank = math.ceil(percentile / 100.0 * len(sorted_values))
    return sorted_values[max(rank, 1) - 1]


def compute_metrics(items: Sequence[QAItem], results: Sequence[QueryResult]) -> GroupMetrics:
    """Aggregate one group's results against the QA items."""
    if len(items) != len(results):
        raise LengthMismatch(f"{len(items)} items vs {len(results)} results")
    correct = 0
    facts_total = 0
    facts_found = 0
    retrieved_hits = 0
    any_rag = any(result.mode == "rag" for result in results)
    for item, result in zip(items, results):
        if judge_answer(result.answer, item.gold_answer):
            correct += 1
        for _, amount in item.gold_facts:
            facts_total += 1
            if judge_answer(result.answer, amount):
                facts_found += 1
        if result.mode == "rag" and any(hit.id == item.gold_passage_id for hit in result.retrieved):
            retrieved_hits += 1
    total = len(items)
    latencies = sorted(result.latency.total_ms for result in results)
    return GroupMetrics(
        accuracy=correct / total if total else 0.0,
        answer_fact_recall=facts_found / facts_total if facts_total else 0.0,
        retrieval_recall=(retrieved_hits / total if total else 0.0) if any_rag else None,
        latency_p50_ms=_nearest_rank(latencies, 50),
        latency_p95_ms=_nearest_rank(latencies, 95),
        latency_mean_ms=sum(latencies) / total if total else 0.0,
        items=total,
    )


def run_groups(
    groups: Sequence[GroupConfig],
    items: Sequence[QAItem],
    index: VectorIndex | None = None,
    embedder=None,
    passages: Sequence[Passage] | None = None,
    completer_factory: Callable[[ModelProfile], object] | None = None,
    k: int = DEFAULT_TOP_K,
    context_budget: int = DEFAULT_CONTEXT_BUDGET,
    seed: int | None = None,
) -> EvalReport:
    """Run every item through every group's pipeline and aggregate.

    completer_factory maps a model profile to a completer; it defaults to
    the scripted completer for every profile, which isolates the retrieval
    variable. Pipeline errors are re-raised annotated with group and item.
    """
    if not groups:
        raise ValueError("at least one group is required")
    factory = completer_factory or (lambda profile: ScriptedCompleter())
    outcomes = []
    for group in groups:
        if group.rag and (index is None or embedder is None):
            raise ValueError(f"group {group.name} enables rag but index/embedder are missing")
        pipeline = RagPipeline(
            factory(group.model),
            index=index,
            embedder=embedder,
            passages=passages,
            k=k,
            context_budget=context_budget,
        )
        mode = "rag" if group.rag else "baseline"
        results = []
        for item in items:
            try:
                results.append(pipeline.answer(item.question, mode=mode))
            except FinragError as exc:
                raise EvalExecutionError(group.name, item.id, exc) from exc
        outcomes.append(GroupOutcome(group, compute_metrics(items, results), results))
    return EvalReport(groups=outcomes, items=len(items), seed=seed, k=k)
