"""finrag: retrieval-augmented question answering over quarterly financial
fundamentals.

The library is organized as a pipeline: records -> passages -> embeddings ->
vector index -> query pipeline, with an evaluation harness and an
operational surface (CLI + HTTP service) on top.
"""

from .embedding import (
    EmbedderProfile,
    LocalHashEmbedder,
    RemoteEmbedder,
    embed_texts,
    hash_embed,
    l2_normalize,
    make_embedder,
)
from .evalbench import (
    EvalReport,
    GroupConfig,
    QAItem,
    compute_metrics,
    judge_answer,
    run_groups,
    standard_groups,
    synthesize_qa,
)
from .gateway import (
    ChatCompletionsClient,
    ChatExchange,
    ModelProfile,
    ScriptedCompleter,
    complete,
    estimate_tokens,
)
from .index import SearchHit, VectorIndex, load_index, save_index
from .passages import Passage, build_passages, load_passages_jsonl, render_passage, write_passages_jsonl
from .pipeline import QueryResult, RagPipeline, assemble_context, build_prompt
from .records import (
    FinRecord,
    NormalizationReport,
    clean_dataset,
    format_amount,
    load_dataset,
    normalize_date,
    parse_amount,
    parse_record,
    write_records_jsonl,
)

__version__ = "0.1.0"
