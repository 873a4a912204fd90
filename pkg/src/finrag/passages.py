"""Deterministic rendering of record groups into retrievable text passages.

One passage covers one (ticker, fiscal quarter) snapshot. The template is
fixed so that passage text, and everything downstream of it, is reproducible
byte for byte.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

from .errors import ConflictingCompanyName, InvalidDate
from .gateway import CHARS_PER_TOKEN, estimate_tokens
from .records import FinRecord, format_amount

DEFAULT_MAX_SEQUENCE_TOKENS = 512


@dataclass(frozen=True)
class Passage:
    """A retrievable text unit with a stable id "<ticker>:<ISO period>"."""

    id: str
    ticker: str
    period: date
    text: str
    facts: tuple[tuple[str, float], ...]
    truncated: bool = False

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "ticker": self.ticker,
            "period": self.period.isoformat(),
            "text": self.text,
            "facts": [[indicator, amount] for indicator, amount in self.facts],
        }


def _compose(company: str, ticker: str, period: date, facts: Sequence[tuple[str, float]]) -> str:
    clauses = "; ".join(
        f"{indicator} of {format_amount(amount)} USD" for indicator, amount in facts
    )
    return f"For the quarter ending {period.isoformat()}, {company} ({ticker}) reported {clauses}."


def render_passage(
    company: str,
    ticker: str,
    period: date,
    facts: Sequence[tuple[str, float]],
    max_tokens: int = DEFAULT_MAX_SEQUENCE_TOKENS,
) -> str:
    """Render the fixed passage template, capped at max_tokens.

    Amounts are plain decimals without separators. Text over the cap is cut
    at the estimator's character equivalent so the token estimate never
    exceeds max_tokens.
    """
    text = _compose(company, ticker, period, facts)
    if estimate_tokens(text) > max_tokens:
        text = text[: max_tokens * CHARS_PER_TOKEN]
    return text


def build_passages(
    records: Iterable[FinRecord],
    max_tokens: int = DEFAULT_MAX_SEQUENCE_TOKENS,
) -> list[Passage]:
    """Group records into one passage per (ticker, period).

    Output is sorted by (ticker, period) and facts by (indicator, amount),
    so the result is identical for any permutation of the input. Exact
    duplicate facts collapse; a ticker+period seen under two company names
    is an error.
    """
    groups: dict[tuple[str, date], tuple[str, set[tuple[str, float]]]] = {}
    for record in records:
        key = (record.ticker, record.period)
        if key not in groups:
            groups[key] = (record.company, set())
        company, facts = groups[key]
        if record.company != company:
            first, second = sorted([company, record.company])
            raise ConflictingCompanyName(
                f"{record.ticker}:{record.period.isoformat()} maps to both "
                f"{first!r} and {second!r}"
            )
        facts.add((record.indicator, record.amount))

    passages = []
    for (ticker, period) in sorted(groups):
        company, fact_set = groups[(ticker, period)]
        facts = tuple(sorted(fact_set))
        full_text = _compose(company, ticker, period, facts)
        truncated = estimate_tokens(full_text) > max_tokens
        text = full_text[: max_tokens * CHARS_PER_TOKEN] if truncated else full_text
        passages.append(
            Passage(
                id=f"{ticker}:{period.isoformat()}",
                ticker=ticker,
                period=period,
                text=text,
                facts=facts,
                truncated=truncated,
            )
        )
    return passages


def write_passages_jsonl(passages: Iterable[Passage], sink: BinaryIO | io.TextIOBase) -> int:
    """Serialize passages as JSON-lines for inspection and re-indexing."""
    count = 0
    for passage in passages:
        line = json.dumps(passage.to_dict(), ensure_ascii=False) + "\n"
        if isinstance(sink, io.TextIOBase):
            sink.write(line)
        else:
            sink.write(line.encode("utf-8"))
        count += 1
    return count


def load_passages_jsonl(source) -> list[Passage]:
    """Reload passages written by write_passages_jsonl (path or file object)."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    passages = []
    for line in text.splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        try:
            period = date.fromisoformat(raw["period"])
        except ValueError as exc:
            raise InvalidDate(f"bad period in passage file: {raw.get('period')!r}") from exc
        passages.append(
            Passage(
                id=raw["id"],
                ticker=raw["ticker"],
                period=period,
                text=raw["text"],
                facts=tuple((indicator, float(amount)) for indicator, amount in raw["facts"]),
            )
        )
    return passages
