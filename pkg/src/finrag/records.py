"""Parsing, validation, and normalization of quarterly fundamentals rows.

All functions here are pure: they read their inputs and return new values,
so they are safe to call concurrently. A row is a mapping of field name to
text; the canonical fields are period, company, tickers, indicator, amount.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from statistics import median
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from .errors import (
    AmbiguousDate,
    IngestError,
    InvalidDate,
    InvalidField,
    MalformedNumber,
    MissingField,
    MissingValue,
    UnknownFormat,
    UnreadableSource,
)

PERIOD_MIN = date(1990, 1, 1)
PERIOD_MAX = date(2100, 12, 31)

REQUIRED_FIELDS = ("period", "company", "tickers", "indicator", "amount")

# Robust z-score threshold for outlier flagging: |x - median| / MAD > 6.
OUTLIER_Z_THRESHOLD = 6.0

_TICKER_RE = re.compile(r"^[A-Z.\-]{1,6}$")
_NUMBER_RE = re.compile(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?$")
_CURRENCY_SYMBOLS = ("$", "€", "£")

_YMD_RE = re.compile(r"^(\d{4})([-/])(\d{1,2})\2(\d{1,2})$")
_MDY_RE = re.compile(r"^(\d{1,2})/(\d{1,2})/(\d{4})$")

_EXCERPT_LIMIT = 120


@dataclass(frozen=True)
class FinRecord:
    """One normalized financial fact: a metric value for a company-quarter.

    Invariants are enforced at construction time: the period falls inside
    the supported calendar window, the ticker is 1-6 characters from
    [A-Z.-], the company and indicator are non-empty, and the amount is a
    finite USD value.
    """

    period: date
    company: str
    ticker: str
    indicator: str
    amount: float

    def __post_init__(self):
        if not isinstance(self.period, date):
            raise InvalidDate(f"period must be a calendar date, got {self.period!r}")
        if not PERIOD_MIN <= self.period <= PERIOD_MAX:
            raise InvalidField(
                f"period {self.period.isoformat()} outside "
                f"[{PERIOD_MIN.isoformat()}, {PERIOD_MAX.isoformat()}]",
                code="period_out_of_range",
            )
        if not self.company.strip():
            raise InvalidField("company is empty", code="empty_company")
        if not _TICKER_RE.match(self.ticker):
            raise InvalidField(
                f"ticker {self.ticker!r} must be 1-6 characters from [A-Z.-]",
                code="invalid_ticker",
            )
        if not self.indicator.strip():
            raise InvalidField("indicator is empty", code="empty_indicator")
        if not math.isfinite(self.amount):
            raise InvalidField(f"amount {self.amount!r} is not finite", code="amount_not_finite")

    @property
    def fact_key(self) -> tuple[str, date, str]:
        return (self.ticker, self.period, self.indicator)

    def to_row(self) -> dict:
        """Canonical row shape: ISO period, plain numeric amount."""
        return {
            "period": self.period.isoformat(),
            "company": self.company,
            "tickers": self.ticker,
            "indicator": self.indicator,
            "amount": self.amount,
        }


@dataclass(frozen=True)
class RejectedRow:
    row_number: int
    code: str
    excerpt: str


@dataclass
class NormalizationReport:
    """Audit of a load or clean pass over a dataset.

    rows_read always equals rows_accepted + rows_rejected. Duplicate drops
    and outlier flags are counted separately because those rows were
    accepted first and adjusted afterwards.
    """

    rows_read: int = 0
    rows_accepted: int = 0
    rows_rejected: int = 0
    rejects: list[RejectedRow] = field(default_factory=list)
    duplicates_dropped: int = 0
    outliers_flagged: int = 0

    def reject(self, row_number: int, code: str, excerpt: str) -> None:
        self.rows_rejected += 1
        self.rejects.append(RejectedRow(row_number, code, excerpt[:_EXCERPT_LIMIT]))

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_accepted": self.rows_accepted,
            "rows_rejected": self.rows_rejected,
            "rejects": [
                {"row_number": r.row_number, "code": r.code, "excerpt": r.excerpt}
                for r in self.rejects
            ],
            "duplicates_dropped": self.duplicates_dropped,
            "outliers_flagged": self.outliers_flagged,
        }


def parse_amount(raw: str) -> float:
    """Parse a monetary text field into a signed float (USD).

    Strips surrounding whitespace, one leading currency symbol ($, euro,
    pound), and all comma thousands separators. A fully parenthesized value
    "(x)" is the accounting convention for -x. Anything left that is not a
    plain or exponent-form number is malformed.

    Raises:
        MissingValue: empty or whitespace-only input.
        MalformedNumber: residual non-numeric characters, multiple decimal
            points, or a non-finite result.
    """
    text = raw.strip()
    if not text:
        raise MissingValue("amount value is empty")
    negative = text.startswith("(") and text.endswith(")")
    if negative:
        text = text[1:-1].strip()
    if text[:1] in _CURRENCY_SYMBOLS:
        text = text[1:].strip()
    text = text.replace(",", "")
    if not _NUMBER_RE.match(text):
        raise MalformedNumber(f"cannot parse amount {raw!r}")
    value = float(text)
    if negative:
        value = -value
    if not math.isfinite(value):
        raise MalformedNumber(f"amount {raw!r} is out of float range")
    return value


def format_amount(value: float) -> str:
    """Canonical plain-decimal rendering: positional digits only, no
    separators, no exponent, no trailing .0; parse_amount round-trips it
    exactly."""
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return np.format_float_positional(value, unique=True, trim="-")


def _try_date(year: int, month: int, day: int) -> date | None:
    try:
        return date(year, month, day)
    except ValueError:
        return None


def normalize_date(raw: str) -> date:
    """Parse one of the accepted date shapes into a calendar date.

    Accepted shapes: year-first with slash or dash separators ("2023/3/31",
    "2023-03-31") and month-first "MM/DD/YYYY". A month-first string whose
    day-first reading is also a valid, different date is rejected as
    ambiguous rather than guessed.
    """
    text = raw.strip()
    if not text:
        raise InvalidDate("date value is empty")
    m = _YMD_RE.match(text)
    if m:
        parsed = _try_date(int(m.group(1)), int(m.group(3)), int(m.group(4)))
        if parsed is None:
            raise InvalidDate(f"out-of-range month or day in {raw!r}")
        return parsed
    m = _MDY_RE.match(text)
    if m:
        a, b, year = int(m.group(1)), int(m.group(2)), int(m.group(3))
        month_first = _try_date(year, a, b)
        day_first = _try_date(year, b, a)
        if month_first and day_first and a != b:
            raise AmbiguousDate(
                f"{raw!r} reads as both {month_first.isoformat()} and {day_first.isoformat()}"
            )
        if month_first:
            return month_first
        raise InvalidDate(f"out-of-range month or day in {raw!r}")
    raise InvalidDate(f"unrecognized date shape {raw!r}")


def parse_record(row: dict) -> FinRecord:
    """Build a validated FinRecord from a raw row mapping.

    Field names are matched case-insensitively. The ticker is uppercased;
    the indicator is trimmed and internal whitespace collapsed.
    """
    values = {str(k).strip().lower(): v for k, v in row.items()}

    def need(name: str) -> str:
        if name not in values:
            raise MissingField(name)
        value = values[name]
        return "" if value is None else str(value)

    period = normalize_date(need("period"))
    company = need("company").strip()
    ticker = need("tickers").strip().upper()
    indicator = " ".join(need("indicator").split())
    amount = parse_amount(need("amount"))
    return FinRecord(period, company, ticker, indicator, amount)


def _canonical_format(fmt: str) -> str:
    aliases = {
        "jsonl": "jsonl",
        "json-lines": "jsonl",
        "json": "json",
        "json-array": "json",
        "csv": "csv",
        "csv-with-header": "csv",
    }
    key = fmt.strip().lower()
    if key not in aliases:
        raise UnknownFormat(f"unknown dataset format {fmt!r}; expected jsonl, json, or csv")
    return aliases[key]


def _read_text(source) -> str:
    try:
        if isinstance(source, (str, Path)):
            data = Path(source).read_bytes()
        elif isinstance(source, (bytes, bytearray)):
            data = bytes(source)
        else:
            data = source.read()
        if isinstance(data, str):
            return data
        return data.decode("utf-8-sig")
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadableSource(str(exc)) from exc


def _iter_jsonl_rows(text: str) -> Iterator[tuple[int, dict | IngestError, str]]:
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            yield line_number, InvalidField(f"bad JSON: {exc}", code="bad_json"), line
            continue
        if not isinstance(row, dict):
            yield line_number, InvalidField("row is not a JSON object", code="not_an_object"), line
            continue
        yield line_number, row, line


def _iter_json_array_rows(text: str) -> Iterator[tuple[int, dict | IngestError, str]]:
    try:
        payload = json.loads(text) if text.strip() else []
    except json.JSONDecodeError as exc:
        raise UnreadableSource(f"not a parseable JSON document: {exc}") from exc
    if not isinstance(payload, list):
        raise UnreadableSource("json-array source must contain a top-level array")
    for index, row in enumerate(payload, start=1):
        excerpt = json.dumps(row, ensure_ascii=False, default=str)
        if not isinstance(row, dict):
            yield index, InvalidField("row is not a JSON object", code="not_an_object"), excerpt
            continue
        yield index, row, excerpt


def _iter_csv_rows(text: str) -> Iterator[tuple[int, dict | IngestError, str]]:
    reader = csv.DictReader(io.StringIO(text))
    for index, row in enumerate(reader, start=1):
        row.pop(None, None)  # cells beyond the header are not fields
        excerpt = json.dumps(row, ensure_ascii=False, default=str)
        yield index, row, excerpt


_ROW_ITERATORS = {
    "jsonl": _iter_jsonl_rows,
    "json": _iter_json_array_rows,
    "csv": _iter_csv_rows,
}


def load_dataset(source, fmt: str) -> tuple[list[FinRecord], NormalizationReport]:
    """Load a dataset into records plus a load report.

    ``source`` is a path, bytes, or binary file object; ``fmt`` is one of
    jsonl (one JSON object per line), json (top-level array), or csv (header
    row with the canonical field names). A bad row never aborts the load:
    it is recorded as a reject and the scan continues. Record order follows
    source order.
    """
    row_iterator = _ROW_ITERATORS[_canonical_format(fmt)]
    text = _read_text(source)
    records: list[FinRecord] = []
    report = NormalizationReport()
    for row_number, row, excerpt in row_iterator(text):
        report.rows_read += 1
        if isinstance(row, IngestError):
            report.reject(row_number, row.code, excerpt)
            continue
        try:
            records.append(parse_record(row))
        except IngestError as exc:
            report.reject(row_number, exc.code, excerpt)
            continue
        report.rows_accepted += 1
    return records, report


def _count_outliers(records: Iterable[FinRecord]) -> int:
    """Count amounts with |robust z| > threshold per (ticker, indicator) series.

    Robust z is (x - median) / MAD. A zero MAD (at least half the series
    identical) degenerates to flagging every value unequal to the median.
    Flagged records are retained; this only counts them.
    """
    series: dict[tuple[str, str], list[float]] = {}
    for record in records:
        series.setdefault((record.ticker, record.indicator), []).append(record.amount)
    flagged = 0
    for amounts in series.values():
        center = median(amounts)
        mad = median([abs(a - center) for a in amounts])
        if mad > 0:
            flagged += sum(1 for a in amounts if abs(a - center) / mad > OUTLIER_Z_THRESHOLD)
        else:
            flagged += sum(1 for a in amounts if a != center)
    return flagged


def clean_dataset(records: list[FinRecord]) -> tuple[list[FinRecord], NormalizationReport]:
    """Deduplicate records and flag (but retain) outlier amounts.

    Exact duplicates on (period, ticker, indicator, amount) keep the first
    occurrence; duplicates with a conflicting amount keep the last-seen
    amount in the first occurrence's position. Outliers are flagged in the
    report only, never deleted. Idempotent: cleaning a cleaned list changes
    nothing.
    """
    report = NormalizationReport(
        rows_read=len(records), rows_accepted=len(records), rows_rejected=0
    )
    kept: dict[tuple[str, date, str], int] = {}
    output: list[FinRecord] = []
    for record in records:
        key = record.fact_key
        if key not in kept:
            kept[key] = len(output)
            output.append(record)
            continue
        report.duplicates_dropped += 1
        if output[kept[key]].amount != record.amount:
            output[kept[key]] = record  # conflicting amount: last occurrence wins
    report.outliers_flagged = _count_outliers(output)
    return output, report


def write_records_jsonl(records: Iterable[FinRecord], sink: BinaryIO | io.TextIOBase) -> int:
    """Write records in the canonical JSON-lines form; returns rows written."""
    count = 0
    for record in records:
        line = json.dumps(record.to_row(), ensure_ascii=False) + "\n"
        if isinstance(sink, io.TextIOBase):
            sink.write(line)
        else:
            sink.write(line.encode("utf-8"))
        count += 1
    return count
