"""Command-line interface: ingest, index, query, eval, serve, bench.

Exit codes: 0 success; 2 operational failure (unreadable input, embedder or
upstream failure, bad arguments); 3 partial ingest (some rows rejected).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .config import AppConfig, load_config
from .errors import FinragError, UnknownFormat, UnreadableSource
from .evalbench import run_groups, standard_groups, synthesize_qa
from .index import VectorIndex, load_index
from .passages import build_passages, load_passages_jsonl, write_passages_jsonl
from .pipeline import RagPipeline
from .records import clean_dataset, load_dataset, write_records_jsonl
from .service import create_server

PASSAGES_SUFFIX = ".passages.jsonl"

_FORMAT_BY_EXTENSION = {".jsonl": "jsonl", ".ndjson": "jsonl", ".json": "json", ".csv": "csv"}


def _detect_format(path: str, explicit: str | None) -> str:
    if explicit and explicit != "auto":
        return explicit
    suffix = Path(path).suffix.lower()
    if suffix not in _FORMAT_BY_EXTENSION:
        raise UnknownFormat(f"cannot infer dataset format from {path!r}; pass --format")
    return _FORMAT_BY_EXTENSION[suffix]


def _atomic_write(path: Path, writer) -> None:
    """Write via a temp file and rename so a crash never leaves partial output."""
    temp = path.with_name(path.name + ".tmp")
    try:
        with open(temp, "wb") as sink:
            writer(sink)
        os.replace(temp, path)
    except BaseException:
        temp.unlink(missing_ok=True)
        raise


def _config_from_args(args) -> AppConfig:
    overrides = {}
    for name in ("embedder_kind", "dim", "k", "context_budget", "completer",
                 "base_model", "enhanced_model", "bind"):
        if hasattr(args, name):
            overrides[name] = getattr(args, name)
    return load_config(config_path=getattr(args, "config", None), overrides=overrides)


def cmd_ingest(args) -> int:
    try:
        fmt = _detect_format(args.dataset, args.format)
        records, load_report = load_dataset(args.dataset, fmt)
    except (UnreadableSource, UnknownFormat) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    records, clean_report = clean_dataset(records)
    report = load_report.to_dict()
    report["duplicates_dropped"] = clean_report.duplicates_dropped
    report["outliers_flagged"] = clean_report.outliers_flagged
    report["records_written"] = len(records)

    out = Path(args.output)
    _atomic_write(out, lambda sink: write_records_jsonl(records, sink))
    report_path = out.with_name(out.name + ".report.json")
    report_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    print(
        f"read {report['rows_read']} rows: {report['rows_accepted']} accepted, "
        f"{report['rows_rejected']} rejected, {report['duplicates_dropped']} duplicates dropped, "
        f"{report['outliers_flagged']} outliers flagged"
    )
    print(f"wrote {len(records)} records to {out}")
    return 0 if report["rows_rejected"] == 0 else 3


def cmd_index(args) -> int:
    config = _config_from_args(args)
    try:
        records, _ = load_dataset(args.records, "jsonl")
        passages = build_passages(records)
        embedder = config.make_embedder()
        index = VectorIndex(dim=config.dim)
        if passages:
            vectors = embedder.embed_texts([p.text for p in passages])
            index.add_many([p.id for p in passages], vectors)
        index_path = Path(args.index)
        _atomic_write(index_path, index.save)
        sidecar = index_path.with_name(index_path.name + PASSAGES_SUFFIX)
        _atomic_write(sidecar, lambda sink: write_passages_jsonl(passages, sink))
    except FinragError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"indexed {index.count} passages")
    return 0


def _load_pipeline(args, config: AppConfig, need_index: bool) -> RagPipeline:
    index = None
    passages = []
    if need_index:
        index_path = Path(args.index)
        index = load_index(index_path)
        sidecar = index_path.with_name(index_path.name + PASSAGES_SUFFIX)
        if sidecar.exists():
            passages = load_passages_jsonl(sidecar)
    return RagPipeline(
        config.make_completer(),
        index=index,
        embedder=config.make_embedder() if need_index else None,
        passages=passages,
        k=config.k,
        context_budget=config.context_budget,
    )


def cmd_query(args) -> int:
    config = _config_from_args(args)
    need_index = args.mode == "rag"
    try:
        pipeline = _load_pipeline(args, config, need_index)
    except (FinragError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.repl:
        for line in sys.stdin:
            question = line.strip()
            if not question:
                continue
            try:
                result = pipeline.answer(question, mode=args.mode, k=args.k)
                print(json.dumps(result.to_dict()), flush=True)
            except FinragError as exc:
                print(json.dumps({"error": str(exc)}), flush=True)
        return 0
    try:
        result = pipeline.answer(args.question, mode=args.mode, k=args.k)
    except FinragError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(result.to_dict(), indent=2))
    return 0


def cmd_eval(args) -> int:
    config = _config_from_args(args)
    all_groups = standard_groups(
        base=config.model_profile("base"), enhanced=config.model_profile("enhanced")
    )
    names = [name.strip() for name in args.groups.split(",") if name.strip()]
    unknown = [name for name in names if name not in all_groups]
    if unknown:
        valid = ", ".join(all_groups)
        print(f"error: unknown group(s) {', '.join(unknown)}; valid groups: {valid}", file=sys.stderr)
        return 2
    try:
        records, _ = load_dataset(args.records, "jsonl")
        items = synthesize_qa(records, n=args.n, seed=args.seed)
        index_path = Path(args.index)
        index = load_index(index_path)
        passages = load_passages_jsonl(index_path.with_name(index_path.name + PASSAGES_SUFFIX))
        completer_factory = None
        if config.completer == "remote":
            completer_factory = lambda profile: config.make_completer(
                "enhanced" if profile.name == config.enhanced_model else "base"
            )
        report = run_groups(
            [all_groups[name] for name in names],
            items,
            index=index,
            embedder=config.make_embedder(),
            passages=passages,
            completer_factory=completer_factory,
            k=config.k,
            context_budget=config.context_budget,
            seed=args.seed,
        )
    except (FinragError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.json"
    report_path.write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    table = report.to_table()
    (out_dir / "report_table.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    print(f"report written to {report_path}")
    return 0


def cmd_serve(args) -> int:
    config = _config_from_args(args)
    try:
        pipeline = _load_pipeline(args, config, need_index=True)
        server = create_server(config.bind, pipeline)
    except (FinragError, OSError, ValueError) as exc:
        print(f"error: startup failed: {exc}", file=sys.stderr)
        return 2
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port} (index: {pipeline.index.count} passages)", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def cmd_bench(args) -> int:
    """Measure exact top-k search latency over a synthetic index."""
    rng = np.random.default_rng(args.seed)
    index = VectorIndex(dim=args.dim)
    vectors = rng.standard_normal((args.n, args.dim)).astype(np.float32)
    index.add_many([f"v{i}" for i in range(args.n)], vectors)
    queries = rng.standard_normal((args.queries, args.dim)).astype(np.float32)

    def timed_run() -> list[float]:
        index.search_top_k(queries[0], args.k)  # warm the matrix cache
        samples = []
        for query in queries:
            started = time.perf_counter()
            index.search_top_k(query, args.k)
            samples.append((time.perf_counter() - started) * 1000.0)
        return samples

    threads = "unlimited"
    if args.single_thread:
        try:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=1):
                samples = timed_run()
            threads = 1
        except ImportError:
            samples = timed_run()
    else:
        samples = timed_run()

    samples.sort()
    result = {
        "n": args.n,
        "dim": args.dim,
        "k": args.k,
        "queries": args.queries,
        "blas_threads": threads,
        "per_query_ms": {
            "p50": samples[len(samples) // 2],
            "max": samples[-1],
            "mean": sum(samples) / len(samples),
        },
    }
    print(json.dumps(result, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finrag",
        description="Retrieval-augmented question answering over quarterly fundamentals",
    )
    parser.add_argument("--config", help="JSON config file mirroring AppConfig")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize a dataset into canonical records")
    p.add_argument("dataset", help="input file (jsonl, json array, or csv)")
    p.add_argument("output", help="output path for canonical JSON-lines records")
    p.add_argument("--format", default="auto", choices=["auto", "jsonl", "json", "csv"])
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("index", help="build and persist the vector index")
    p.add_argument("records", help="canonical records (JSON-lines)")
    p.add_argument("index", help="output index path")
    p.add_argument("--embedder", dest="embedder_kind", choices=["local-hash", "remote"])
    p.add_argument("--dim", type=int)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", help="answer one question (or run a REPL)")
    p.add_argument("question", nargs="?", default="")
    p.add_argument("--index", help="index path (required for rag mode)")
    p.add_argument("--mode", default="rag", choices=["rag", "baseline"])
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--repl", action="store_true", help="one question per stdin line, one JSON per line")
    p.add_argument("--completer", choices=["scripted", "remote"])
    p.add_argument("--embedder", dest="embedder_kind", choices=["local-hash", "remote"])
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="run comparison groups over a synthesized QA set")
    p.add_argument("--records", required=True, help="canonical records (JSON-lines)")
    p.add_argument("--index", required=True, help="index path")
    p.add_argument("--n", type=int, default=50, help="QA items to synthesize")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--groups", default="BG,REG,VUG,FOG")
    p.add_argument("--out", default=".", help="directory for report.json and report_table.txt")
    p.add_argument("--completer", choices=["scripted", "remote"])
    p.add_argument("--embedder", dest="embedder_kind", choices=["local-hash", "remote"])
    p.add_argument("--k", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP query service")
    p.add_argument("--index", required=True)
    p.add_argument("--bind", default=None, help="host:port (default 127.0.0.1:8080)")
    p.add_argument("--completer", choices=["scripted", "remote"])
    p.add_argument("--embedder", dest="embedder_kind", choices=["local-hash", "remote"])
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("bench", help="measure top-k search latency on synthetic vectors")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--dim", type=int, default=384)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--queries", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-single-thread", dest="single_thread", action="store_false",
                   help="let BLAS use all threads")
    p.set_defaults(func=cmd_bench, single_thread=True)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "command", None) == "query" and not args.repl and not args.question:
        print("error: a question (or --repl) is required", file=sys.stderr)
        return 2
    if getattr(args, "command", None) == "query" and args.mode == "rag" and not args.index:
        print("error: --index is required for rag mode", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
