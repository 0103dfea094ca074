"""vecsearch: embedded dense-vector search and retrieval evaluation.

A small, self-contained stack for the standard bi-encoder retrieval
pipeline: embed texts (through an OpenAI-compatible API or an offline
mock), index the vectors with a hierarchical navigable small-world graph
or an exact flat scan, search by dot product, evaluate runs with standard
IR metrics, and measure query throughput.
"""

__version__ = "0.1.0"

from .bench import BenchReport, run_bench
from .corpus import (
    CorpusRecord,
    format_float32,
    format_record,
    read_corpus,
    read_texts,
    write_corpus,
)
from .embed import (
    EmbedConfig,
    EmbedJobReport,
    RateLimiter,
    RetryPolicy,
    WhitespaceTokenizer,
    count_tokens,
    embed_batch,
    mock_embed,
    truncate_text,
)
from .errors import (
    CorruptIndexError,
    DimensionMismatchError,
    DuplicateIdError,
    EmptyIndexError,
    InvalidArgumentError,
    ParseError,
    VecsearchError,
)
from .evaluate import (
    MetricReport,
    QueryMetrics,
    Qrels,
    Run,
    average_precision,
    evaluate,
    ndcg_at_k,
    parse_qrels,
    parse_run,
    recall_at_k,
    rr_at_k,
    write_run,
)
from .flat import FlatIndex
from .hnsw import HnswIndex, HnswParams, SearchParams
from .vectors import (
    Embedding,
    ScoredDoc,
    SearchResult,
    canonical_order,
    dot,
    top_k_merge,
)

__all__ = [
    "BenchReport",
    "CorpusRecord",
    "CorruptIndexError",
    "DimensionMismatchError",
    "DuplicateIdError",
    "Embedding",
    "EmbedConfig",
    "EmbedJobReport",
    "EmptyIndexError",
    "FlatIndex",
    "HnswIndex",
    "HnswParams",
    "InvalidArgumentError",
    "MetricReport",
    "ParseError",
    "Qrels",
    "QueryMetrics",
    "RateLimiter",
    "RetryPolicy",
    "Run",
    "ScoredDoc",
    "SearchParams",
    "SearchResult",
    "VecsearchError",
    "WhitespaceTokenizer",
    "average_precision",
    "canonical_order",
    "count_tokens",
    "dot",
    "embed_batch",
    "evaluate",
    "format_float32",
    "format_record",
    "mock_embed",
    "ndcg_at_k",
    "parse_qrels",
    "parse_run",
    "read_corpus",
    "read_texts",
    "recall_at_k",
    "rr_at_k",
    "run_bench",
    "top_k_merge",
    "truncate_text",
    "write_corpus",
    "write_run",
]
