"""The full query path, retrieval-augmented vs. baseline.

The scripted completer answers strictly from the context block of its
prompt, so the same question succeeds in rag mode and comes back
"INSUFFICIENT CONTEXT" in baseline mode. That contrast is the observable
effect of retrieval, with zero network involved.

Run:  python demos/03_question_answering.py
"""

import json
from datetime import date

from finrag import FinRecord, LocalHashEmbedder, RagPipeline, ScriptedCompleter, VectorIndex, build_passages

RECORDS = [
    FinRecord(date(2023, 3, 31), "Apple Inc.", "AAPL", "Revenue", 94_836_000_000.0),
    FinRecord(date(2023, 3, 31), "Apple Inc.", "AAPL", "NetIncome", 24_160_000_000.0),
    FinRecord(date(2023, 3, 31), "Microsoft", "MSFT", "Revenue", 52_857_000_000.0),
]

QUESTION = "What was Apple Inc.'s NetIncome for the quarter ending 2023-03-31?"


def main():
    passages = build_passages(RECORDS)
    embedder = LocalHashEmbedder(dim=384)
    index = VectorIndex(dim=384)
    index.add_many([p.id for p in passages], embedder.embed_texts([p.text for p in passages]))

    pipeline = RagPipeline(
        ScriptedCompleter(), index=index, embedder=embedder, passages=passages, k=5
    )

    for mode in ("rag", "baseline"):
        result = pipeline.answer(QUESTION, mode=mode)
        print(f"== {mode} ==")
        print(f" answer:    {result.answer}")
        print(f" retrieved: {[hit.id for hit in result.retrieved]}")
        print(f" latency:   {result.latency.total_ms:.2f} ms "
              f"(embed {result.latency.embed_ms:.2f}, search {result.latency.search_ms:.2f}, "
              f"llm {result.latency.llm_ms:.2f})")
        print()

    print("== full rag QueryResult as JSON ==")
    print(json.dumps(pipeline.answer(QUESTION, mode="rag").to_dict(), indent=2)[:600], "...")


if __name__ == "__main__":
    main()
