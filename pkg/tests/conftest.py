"""Shared fixtures: the canonical example row, synthetic corpora, and
ready-made retrieval setups."""

from __future__ import annotations

from datetime import date
from itertools import product

import pytest

from finrag import FinRecord, LocalHashEmbedder, VectorIndex, build_passages

INDICATORS = ("Revenue", "Assets", "NetIncome", "OperatingIncome")

TABLE_ROW = {
    "period": "2023/3/31",
    "company": "Apple Inc.",
    "tickers": "AAPL",
    "indicator": "Revenue",
    "amount": "100000000",
}

APPLE_QUESTION = "What was Apple Inc.'s Revenue for the quarter ending 2023-03-31?"


def letter_tickers(count: int, prefix: str = "") -> list[str]:
    """Distinct all-letter tickers; 'Z'-prefixed ones never collide with
    unprefixed ones (gold tickers draw from A-Y only)."""
    out = []
    for combo in product("ABCDEFGHIJKLMNOPQRSTUVWXY", repeat=3):
        out.append(prefix + "".join(combo))
        if len(out) == count:
            return out
    raise ValueError(f"cannot produce {count} tickers")


def make_gold_records(count: int = 50, period: date = date(2023, 3, 31)) -> list[FinRecord]:
    return [
        FinRecord(
            period,
            f"{ticker} Capital Group",
            ticker,
            INDICATORS[i % len(INDICATORS)],
            float(1_000_000 * (i + 3) + 17),
        )
        for i, ticker in enumerate(letter_tickers(count))
    ]


def make_distractor_records(count: int = 500, period: date = date(2023, 3, 31)) -> list[FinRecord]:
    """Same period and indicators as the gold set, but Z-prefixed tickers and
    company names sharing no tokens with any gold question."""
    return [
        FinRecord(
            period,
            f"{ticker} Holdings Ltd",
            ticker,
            INDICATORS[i % len(INDICATORS)],
            float(7_000_000_000 + i),
        )
        for i, ticker in enumerate(letter_tickers(count, prefix="Z"))
    ]


def build_searchable(records, dim: int = 384):
    """(index, passages, embedder) over a record list with the local embedder."""
    passages = build_passages(records)
    embedder = LocalHashEmbedder(dim=dim)
    index = VectorIndex(dim)
    if passages:
        index.add_many([p.id for p in passages], embedder.embed_texts([p.text for p in passages]))
    return index, passages, embedder


@pytest.fixture
def table_row() -> dict:
    return dict(TABLE_ROW)


@pytest.fixture
def apple_record() -> FinRecord:
    return FinRecord(date(2023, 3, 31), "Apple Inc.", "AAPL", "Revenue", 100000000.0)


@pytest.fixture
def gold_records() -> list[FinRecord]:
    return make_gold_records()


@pytest.fixture(scope="session")
def gold_setup():
    """Session-scoped (index, passages, embedder, records) for the gold corpus."""
    records = make_gold_records()
    index, passages, embedder = build_searchable(records)
    return index, passages, embedder, records
