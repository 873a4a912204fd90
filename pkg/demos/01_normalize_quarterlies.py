"""Normalizing a raw quarterly fundamentals file into canonical records.

Walks through the ingest path: messy rows go in, validated records and an
audit report come out. Bad rows never abort the load; they are itemized in
the report instead.

Run:  python demos/01_normalize_quarterlies.py
"""

import io
import json

from finrag import clean_dataset, load_dataset, parse_amount, normalize_date

# A small dataset the way exports actually look: mixed date shapes, currency
# symbols, thousands separators, an accounting negative, a duplicate row,
# and one row that is simply broken.
RAW_ROWS = [
    {"period": "2023/3/31", "company": "Apple Inc.", "tickers": "AAPL",
     "indicator": "Revenue", "amount": "100000000"},
    {"period": "2023-03-31", "company": "Apple Inc.", "tickers": "aapl",
     "indicator": "NetIncome", "amount": "$24,160,000"},
    {"period": "03/31/2023", "company": "Microsoft", "tickers": "MSFT",
     "indicator": "OperatingIncome", "amount": "(1,250)"},
    {"period": "2023/3/31", "company": "Apple Inc.", "tickers": "AAPL",
     "indicator": "Revenue", "amount": "100000000"},          # exact duplicate
    {"period": "2023/3/31", "company": "Alphabet", "tickers": "GOOGL",
     "indicator": "Assets", "amount": "not reported"},        # malformed
]


def main():
    print("== field-level cleaning ==")
    print(" '$1,234.50' ->", parse_amount("$1,234.50"))
    print(" '(2,500)'   ->", parse_amount("(2,500)"))
    print(" '2023/3/31' ->", normalize_date("2023/3/31"))

    source = io.BytesIO("\n".join(json.dumps(row) for row in RAW_ROWS).encode())
    records, report = load_dataset(source, "jsonl")
    print("\n== load report ==")
    print(f" rows read:     {report.rows_read}")
    print(f" rows accepted: {report.rows_accepted}")
    print(f" rows rejected: {report.rows_rejected}")
    for reject in report.rejects:
        print(f"   row {reject.row_number}: {reject.code}  {reject.excerpt}")

    records, clean_report = clean_dataset(records)
    print("\n== clean report ==")
    print(f" duplicates dropped: {clean_report.duplicates_dropped}")
    print(f" outliers flagged:   {clean_report.outliers_flagged}")

    print("\n== canonical records ==")
    for record in records:
        print(f" {record.period}  {record.ticker:<6} {record.indicator:<16} {record.amount}")


if __name__ == "__main__":
    main()
