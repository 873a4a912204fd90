"""Exact inner-product retrieval over rendered passages.

Records group into one passage per (ticker, quarter); each passage embeds to
a 384-dim vector via deterministic feature hashing; the flat index scores
every vector and returns the exact top-k. Also shows the persistence round
trip: the saved file reloads bit-for-bit.

Run:  python demos/02_search_fundamentals.py
"""

import io
from datetime import date

from finrag import FinRecord, LocalHashEmbedder, VectorIndex, build_passages

RECORDS = [
    FinRecord(date(2023, 3, 31), "Apple Inc.", "AAPL", "Revenue", 94_836_000_000.0),
    FinRecord(date(2023, 3, 31), "Apple Inc.", "AAPL", "NetIncome", 24_160_000_000.0),
    FinRecord(date(2023, 3, 31), "Microsoft", "MSFT", "Revenue", 52_857_000_000.0),
    FinRecord(date(2023, 3, 31), "Microsoft", "MSFT", "NetIncome", 18_299_000_000.0),
    FinRecord(date(2023, 3, 31), "Alphabet", "GOOGL", "Revenue", 69_787_000_000.0),
    FinRecord(date(2023, 3, 31), "Alphabet", "GOOGL", "NetIncome", 15_051_000_000.0),
    FinRecord(date(2022, 12, 31), "Apple Inc.", "AAPL", "Revenue", 117_154_000_000.0),
]


def main():
    passages = build_passages(RECORDS)
    print("== passages ==")
    for passage in passages:
        print(f" [{passage.id}] {passage.text}")

    embedder = LocalHashEmbedder(dim=384)
    index = VectorIndex(dim=384)
    index.add_many([p.id for p in passages], embedder.embed_texts([p.text for p in passages]))

    query = "What was Apple Inc.'s Revenue for the quarter ending 2023-03-31?"
    print(f"\n== top-3 for: {query!r} ==")
    query_vector = embedder.embed_texts([query])[0]
    for hit in index.search_top_k(query_vector, k=3):
        print(f" rank {hit.rank}  score {hit.score:+.4f}  {hit.id}")

    # persistence: the byte stream reloads to an identical index
    buffer = io.BytesIO()
    written = index.save(buffer)
    reloaded = VectorIndex.load(io.BytesIO(buffer.getvalue()))
    same = reloaded.matrix.tobytes() == index.matrix.tobytes() and reloaded.ids == index.ids
    print(f"\n== persistence ==\n {written} bytes written; bit-identical reload: {same}")


if __name__ == "__main__":
    main()
