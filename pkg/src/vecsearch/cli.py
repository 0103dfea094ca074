"""Command-line interface: one binary, five subcommands.

    vecsearch embed     texts -> vector corpus (API endpoint or offline mock)
    vecsearch index     vector corpus -> graph index image
    vecsearch search    index + query vectors -> TREC run file
    vecsearch evaluate  run file + qrels -> metric report
    vecsearch bench     index + queries -> throughput report

Data goes to stdout or the requested output file; diagnostics go to
stderr. Exit codes: 0 success, 1 usage error, 2 data/format error,
3 runtime or I/O error. The embeddings API key is read from the
VECSEARCH_API_KEY environment variable or a --key-file, never from a
flag.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import requests

from . import __version__
from .bench import run_bench
from .corpus import read_corpus, read_texts
from .embed import (
    CheckpointWriter,
    EmbedConfig,
    EmbedJobReport,
    count_tokens,
    embed_batch,
    load_checkpoint,
    mock_embed,
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
from .evaluate import Run, evaluate, parse_qrels, parse_run, write_run
from .flat import FlatIndex
from .hnsw import HnswIndex, HnswParams, SearchParams
from .vectors import Embedding

logger = logging.getLogger(__name__)

API_KEY_ENV = "VECSEARCH_API_KEY"
ENDPOINT_ENV = "VECSEARCH_ENDPOINT"
MODEL_ENV = "VECSEARCH_MODEL"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class _UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="vecsearch",
        description="Embedded dense-vector search and retrieval evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"vecsearch {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", parents=[], help="embed texts into a vector corpus")
    p.add_argument("--input", required=True, help="JSONL file of {docid, text} records")
    p.add_argument("--output", required=True,
                   help="vector corpus to write; doubles as the resume checkpoint")
    p.add_argument("--mock", action="store_true",
                   help="use the deterministic offline embedder (no network, no key)")
    p.add_argument("--dim", type=int, default=1536, help="embedding dimension")
    p.add_argument("--seed", type=int, default=0, help="seed for the mock embedder")
    p.add_argument("--endpoint",
                   default=os.environ.get(ENDPOINT_ENV, "https://api.openai.com/v1"),
                   help="embeddings API base URL (env: " + ENDPOINT_ENV + ")")
    p.add_argument("--model",
                   default=os.environ.get(MODEL_ENV, "text-embedding-ada-002"),
                   help="model name (env: " + MODEL_ENV + ")")
    p.add_argument("--max-tokens", type=int, default=512,
                   help="truncate each text to this many tokens before dispatch")
    p.add_argument("--rate-limit", type=int, default=3500, help="calls per minute")
    p.add_argument("--max-parallel", type=int, default=8, help="concurrent requests")
    p.add_argument("--key-file", help="file holding the API key (else $" + API_KEY_ENV + ")")
    p.add_argument("--gz", action="store_true", help="gzip the output corpus")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("index", help="build a graph index from a vector corpus")
    p.add_argument("--input", required=True, help="vector corpus (JSONL, optionally gzip)")
    p.add_argument("--output", required=True, help="index image path")
    p.add_argument("-m", type=int, default=16, help="max neighbors per upper-layer node")
    p.add_argument("--ef-construction", type=int, default=100,
                   help="candidate pool size during insertion")
    p.add_argument("--threads", type=int, default=1,
                   help="insertion threads (>1 trades determinism for speed)")
    p.add_argument("--seed", type=int, default=None,
                   help="level-sampling seed (default: fresh entropy)")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("search", help="run top-k searches and write a run file")
    p.add_argument("--index", required=True,
                   help="index image, or a vector corpus when --index-type=flat")
    p.add_argument("--index-type", choices=("hnsw", "flat"), default="hnsw")
    p.add_argument("--queries", required=True, help="query vector corpus (JSONL)")
    p.add_argument("-k", type=int, default=1000, help="hits per query")
    p.add_argument("--ef-search", type=int, default=1000,
                   help="candidate pool size during traversal (hnsw only)")
    p.add_argument("--threads", type=int, default=1, help="search threads")
    p.add_argument("--tag", default="vecsearch", help="run tag for the output file")
    p.add_argument("--output", help="run file path (default: stdout)")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("evaluate", help="score a run file against qrels")
    p.add_argument("--run", required=True, help="run file (6-column TREC format)")
    p.add_argument("--qrels", required=True, help="qrels file (4-column TREC format)")
    p.add_argument("--rel-threshold", type=int, default=1,
                   help="min grade counted as relevant for RR/AP/R")
    p.add_argument("--output", help="also write per-query JSON lines here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="measure query throughput on an index image")
    p.add_argument("--index", required=True, help="index image")
    p.add_argument("--queries", required=True, help="query vector corpus (JSONL)")
    p.add_argument("-k", type=int, default=1000, help="hits per query")
    p.add_argument("--ef-search", type=int, default=1000, help="traversal pool size")
    p.add_argument("--threads", type=int, default=1, help="search threads")
    p.add_argument("--trials", type=int, default=4, help="timed trials")
    p.add_argument("--warmup", type=int, default=1, help="untimed warmup passes")
    p.set_defaults(func=cmd_bench)

    return parser


def _load_embeddings(path: str) -> list[Embedding]:
    return [Embedding(r.docid, r.vector) for r in read_corpus(path)]


def _print_embed_report(report: EmbedJobReport) -> None:
    print(f"total inputs:      {report.total_inputs}")
    print(f"succeeded:         {report.succeeded}")
    print(f"failed:            {report.failed_permanently}")
    print(f"retries:           {report.retries_performed}")
    print(f"elapsed:           {report.elapsed_seconds:.2f} s")
    print(f"token count total: {report.token_count_total}")
    print(f"token count mean:  {report.token_count_mean:.1f}")


def cmd_embed(args) -> int:
    texts = list(read_texts(args.input))
    if not texts:
        raise InvalidArgumentError(f"no text records in {args.input!r}")
    if args.mock:
        report = _mock_embed_to_checkpoint(
            texts, args.output, dim=args.dim, seed=args.seed, gz=args.gz
        )
    else:
        key = _resolve_api_key(args.key_file)
        cfg = EmbedConfig(
            endpoint_url=args.endpoint,
            api_key=key,
            model_name=args.model,
            dimension=args.dim,
            max_input_tokens=args.max_tokens,
            rate_limit=args.rate_limit,
            max_parallel=args.max_parallel,
        )
        _, report = embed_batch(
            cfg, texts, checkpoint_path=args.output, checkpoint_gz=args.gz
        )
    _print_embed_report(report)
    return EXIT_OK


def _resolve_api_key(key_file: str | None) -> str:
    if key_file:
        with open(key_file, "r", encoding="utf-8") as f:
            key = f.read().strip()
        if not key:
            raise InvalidArgumentError(f"key file {key_file!r} is empty")
        return key
    key = os.environ.get(API_KEY_ENV, "")
    if not key:
        raise InvalidArgumentError(
            f"no API key: set ${API_KEY_ENV} or pass --key-file (or use --mock)"
        )
    return key


def _mock_embed_to_checkpoint(
    texts: list[tuple[str, str]], output: str, *, dim: int, seed: int, gz: bool
) -> EmbedJobReport:
    done = load_checkpoint(output, dim)
    token_counts = [count_tokens(t) for _, t in texts]
    start = time.monotonic()
    missing = [(i, t) for i, t in enumerate(texts) if t[0] not in done]
    if missing:
        writer = CheckpointWriter(output, gz=gz)
        try:
            for _, (doc_id, text) in missing:
                emb = mock_embed(text, dim, seed, id=doc_id)
                writer.append(doc_id, emb.values)
        finally:
            writer.close()
    return EmbedJobReport(
        total_inputs=len(texts),
        succeeded=len(texts),
        failed_permanently=0,
        retries_performed=0,
        elapsed_seconds=time.monotonic() - start,
        token_count_total=sum(token_counts),
        token_count_mean=sum(token_counts) / len(texts),
    )


def cmd_index(args) -> int:
    params = HnswParams(
        m=args.m, ef_construction=args.ef_construction, seed=args.seed
    )
    logger.info("reading corpus from %s", args.input)
    embeddings = _load_embeddings(args.input)
    logger.info("building index over %d vectors with %d thread(s)",
                len(embeddings), args.threads)
    start = time.monotonic()
    index = HnswIndex.build(embeddings, params, threads=args.threads)
    build_seconds = time.monotonic() - start
    index.freeze()
    with open(args.output, "wb") as sink:
        image_bytes = index.save(sink)
    print(f"nodes:        {len(index)}")
    print(f"dimension:    {index.dimension}")
    print(f"max level:    {index.max_level}")
    print(f"m:            {index.params.m}")
    print(f"m0:           {index.params.m0}")
    print(f"efC:          {index.params.ef_construction}")
    print(f"seed:         {index.params.seed}")
    print(f"threads:      {args.threads}")
    print(f"build time:   {build_seconds:.2f} s")
    print(f"image bytes:  {image_bytes}")
    return EXIT_OK


def cmd_search(args) -> int:
    queries = _load_embeddings(args.queries)
    if not queries:
        raise InvalidArgumentError(f"no queries in {args.queries!r}")
    if args.index_type == "flat":
        corpus = _load_embeddings(args.index)
        if not corpus:
            raise InvalidArgumentError(f"no vectors in {args.index!r}")
        flat = FlatIndex(corpus[0].dimension)
        for e in corpus:
            flat.add(e)
        flat.freeze()

        def search_one(q: Embedding):
            return flat.search(q, args.k)
    else:
        with open(args.index, "rb") as f:
            index = HnswIndex.load(f)
        sp = SearchParams(ef_search=args.ef_search, k=args.k)

        def search_one(q: Embedding):
            return index.search(q, sp)

    if args.threads == 1:
        hits = [search_one(q) for q in queries]
    else:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            hits = list(pool.map(search_one, queries))
    run = Run(rankings={q.id: h for q, h in zip(queries, hits)}, tag=args.tag)
    if args.output:
        lines = write_run(run, args.output)
    else:
        lines = write_run(run, sys.stdout)
    logger.info("wrote %d run lines for %d queries", lines, len(queries))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    run = parse_run(args.run)
    qrels = parse_qrels(args.qrels)
    report = evaluate(run, qrels, binary_rel_threshold=args.rel_threshold)
    print(report.to_table())
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            f.write(report.to_json_lines() + "\n")
    return EXIT_OK


def cmd_bench(args) -> int:
    with open(args.index, "rb") as f:
        index = HnswIndex.load(f)
    queries = _load_embeddings(args.queries)
    if not queries:
        raise InvalidArgumentError(f"no queries in {args.queries!r}")
    report = run_bench(
        index,
        queries,
        k=args.k,
        ef_search=args.ef_search,
        threads=args.threads,
        trials=args.trials,
        warmup=args.warmup,
    )
    print(report.to_text())
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s: %(message)s"
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (
        ParseError,
        CorruptIndexError,
        DuplicateIdError,
        EmptyIndexError,
        DimensionMismatchError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (VecsearchError, requests.RequestException) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
