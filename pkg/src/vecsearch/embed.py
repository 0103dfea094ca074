"""Client for an OpenAI-compatible embeddings endpoint, plus a deterministic
offline mock embedder.

The batch driver keeps the whole pipeline reproducible and survivable at
scale: texts are truncated to a token budget before dispatch, requests are
gated by a sliding-window rate limiter shared across worker threads,
transient failures (408/429/5xx, timeouts, connection errors) retry with
exponential backoff, permanent failures are recorded without aborting the
batch, and every success is appended to a JSON-lines checkpoint so an
interrupted job resumes where it stopped.
"""

from __future__ import annotations

import gzip
import hashlib
import logging
import os
import struct
import threading
import time
import zlib
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np
import requests

from .corpus import CorpusRecord, format_record, read_corpus
from .errors import InvalidArgumentError
from .vectors import Embedding

logger = logging.getLogger(__name__)


class Tokenizer(Protocol):
    """Minimal tokenizer interface; any object with encode/decode fits,
    including tiktoken encodings."""

    def encode(self, text: str) -> list: ...

    def decode(self, tokens: list) -> str: ...


class WhitespaceTokenizer:
    """Bundled default: tokens are whitespace-separated words."""

    def encode(self, text: str) -> list[str]:
        return text.split()

    def decode(self, tokens: list[str]) -> str:
        return " ".join(tokens)


def count_tokens(text: str, tokenizer: Tokenizer | None = None) -> int:
    """Token count under the supplied tokenizer (whitespace by default)."""
    tok = tokenizer if tokenizer is not None else WhitespaceTokenizer()
    return len(tok.encode(text))


def truncate_text(text: str, max_tokens: int, tokenizer: Tokenizer | None = None) -> str:
    """Cut a text down to at most max_tokens tokens, round-tripping through
    the tokenizer only when the budget is exceeded."""
    tok = tokenizer if tokenizer is not None else WhitespaceTokenizer()
    tokens = tok.encode(text)
    if len(tokens) <= max_tokens:
        return text
    return tok.decode(tokens[:max_tokens])


@dataclass(frozen=True)
class RetryPolicy:
    """Exponential backoff for transient failures."""

    max_attempts: int = 5
    base_backoff: float = 1.0
    multiplier: float = 2.0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise InvalidArgumentError(
                f"max_attempts must be >= 1, got {self.max_attempts}"
            )
        if self.base_backoff < 0 or self.multiplier <= 0:
            raise InvalidArgumentError("backoff parameters must be positive")


@dataclass(frozen=True)
class EmbedConfig:
    """Connection and throughput discipline for an embeddings endpoint."""

    endpoint_url: str
    api_key: str = field(repr=False, default="")
    model_name: str = "text-embedding-ada-002"
    dimension: int = 1536
    max_input_tokens: int = 512
    rate_limit: int = 3500  # calls per minute
    max_parallel: int = 8
    retry: RetryPolicy = RetryPolicy()
    timeout: float = 30.0

    def __post_init__(self):
        if not self.endpoint_url:
            raise InvalidArgumentError("endpoint_url must be non-empty")
        if self.dimension < 1:
            raise InvalidArgumentError(f"dimension must be >= 1, got {self.dimension}")
        if self.max_input_tokens < 1:
            raise InvalidArgumentError(
                f"max_input_tokens must be >= 1, got {self.max_input_tokens}"
            )
        if self.rate_limit < 1:
            raise InvalidArgumentError(f"rate_limit must be >= 1, got {self.rate_limit}")
        if self.max_parallel < 1:
            raise InvalidArgumentError(
                f"max_parallel must be >= 1, got {self.max_parallel}"
            )


@dataclass
class EmbedJobReport:
    """Outcome of one embed_batch run."""

    total_inputs: int = 0
    succeeded: int = 0
    failed_permanently: int = 0
    retries_performed: int = 0
    elapsed_seconds: float = 0.0
    token_count_total: int = 0
    token_count_mean: float = 0.0


class RateLimiter:
    """Sliding-window limiter: at most ``rate_per_minute`` acquisitions in
    any 60-second window. Thread-safe; clock and sleep are injectable so
    conformance tests can run on a fake clock."""

    def __init__(
        self,
        rate_per_minute: int,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if rate_per_minute < 1:
            raise InvalidArgumentError(
                f"rate_per_minute must be >= 1, got {rate_per_minute}"
            )
        self._rate = rate_per_minute
        self._clock = clock
        self._sleep = sleep
        self._window: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> float:
        """Block until a dispatch slot is free; returns its timestamp."""
        with self._lock:
            while True:
                now = self._clock()
                while self._window and now - self._window[0] >= 60.0:
                    self._window.popleft()
                if len(self._window) < self._rate:
                    self._window.append(now)
                    return now
                self._sleep(60.0 - (now - self._window[0]))


def mock_embed(text: str, dimension: int, seed: int = 0, *, id: str | None = None) -> Embedding:
    """Deterministic offline embedder: identical (text, dimension, seed)
    always yields the identical unit-norm vector, across processes."""
    if dimension < 1:
        raise InvalidArgumentError(f"dimension must be >= 1, got {dimension}")
    digest = hashlib.sha256(
        struct.pack("<q", seed) + text.encode("utf-8")
    ).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:16], "little")))
    v = rng.standard_normal(dimension)
    norm = np.linalg.norm(v)
    if norm == 0.0:  # vanishing probability; keep the contract anyway
        v[0] = 1.0
        norm = 1.0
    return Embedding(id=text if id is None else id, values=(v / norm).astype(np.float32))


_TRANSIENT_STATUSES = frozenset({408, 429}) | frozenset(range(500, 600))


class _PermanentFailure(Exception):
    pass


class _TransientFailure(Exception):
    pass


class CheckpointWriter:
    """Appends corpus records to a checkpoint file, flushing after every
    record so an interrupted job loses at most one line. With ``gz=True``
    each session appends a fresh gzip member; multi-member files read back
    transparently. Opens lazily, so a fully resumed run leaves the file
    untouched."""

    def __init__(self, path: str, gz: bool = False):
        self._path = path
        self._gz = gz
        self._raw = None
        self._stream = None

    def append(self, docid: str, vector: np.ndarray) -> None:
        if self._raw is None:
            self._raw = open(self._path, "ab")
            self._stream = (
                gzip.GzipFile(fileobj=self._raw, mode="wb") if self._gz else self._raw
            )
        line = format_record(CorpusRecord(docid=docid, vector=vector))
        self._stream.write(line.encode("utf-8") + b"\n")
        self._stream.flush()
        if self._stream is not self._raw:
            self._raw.flush()

    def close(self) -> None:
        if self._raw is None:
            return
        if self._stream is not self._raw:
            self._stream.close()
        self._raw.close()


def embed_batch(
    cfg: EmbedConfig,
    texts: Sequence[tuple[str, str]],
    *,
    tokenizer: Tokenizer | None = None,
    checkpoint_path: str | None = None,
    checkpoint_gz: bool = False,
    session: requests.Session | None = None,
    clock: Callable[[], float] = time.monotonic,
    sleep: Callable[[float], None] = time.sleep,
) -> tuple[list[Embedding], EmbedJobReport]:
    """Embed (id, text) pairs through the configured endpoint.

    Output order matches input order; items that fail permanently are
    recorded in the report and omitted. With ``checkpoint_path``, ids
    already present in the checkpoint are not re-requested and every new
    success is appended immediately.
    """
    if not texts:
        raise InvalidArgumentError("texts must be non-empty")
    ids = [t[0] for t in texts]
    if len(set(ids)) != len(ids):
        raise InvalidArgumentError("duplicate ids in input batch")
    tok = tokenizer if tokenizer is not None else WhitespaceTokenizer()

    done: dict[str, np.ndarray] = {}
    if checkpoint_path is not None:
        done = load_checkpoint(checkpoint_path, cfg.dimension)

    token_counts = [count_tokens(text, tok) for _, text in texts]
    report = EmbedJobReport(
        total_inputs=len(texts),
        token_count_total=sum(token_counts),
        token_count_mean=sum(token_counts) / len(texts),
    )

    limiter = RateLimiter(cfg.rate_limit, clock=clock, sleep=sleep)
    own_session = session is None
    http = session if session is not None else requests.Session()
    results: list[np.ndarray | None] = [None] * len(texts)
    retry_count = [0]
    failed = [0]
    lock = threading.Lock()
    writer = (
        CheckpointWriter(checkpoint_path, gz=checkpoint_gz)
        if checkpoint_path is not None
        else None
    )

    def fetch(i: int) -> None:
        doc_id, text = texts[i]
        if doc_id in done:
            results[i] = done[doc_id]
            return
        payload = truncate_text(text, cfg.max_input_tokens, tok)
        try:
            vec, retries = _fetch_one(cfg, http, limiter, payload, sleep)
        except _PermanentFailure as exc:
            with lock:
                failed[0] += 1
                retry_count[0] += exc.args[1]
            logger.warning("permanent failure for id %r: %s", doc_id, exc.args[0])
            return
        with lock:
            retry_count[0] += retries
            results[i] = vec
            if writer is not None:
                writer.append(doc_id, vec)

    start = clock()
    try:
        if cfg.max_parallel == 1:
            for i in range(len(texts)):
                fetch(i)
        else:
            with ThreadPoolExecutor(max_workers=cfg.max_parallel) as pool:
                for f in [pool.submit(fetch, i) for i in range(len(texts))]:
                    f.result()
    finally:
        if writer is not None:
            writer.close()
        if own_session:
            http.close()
    report.elapsed_seconds = clock() - start
    report.retries_performed = retry_count[0]
    report.failed_permanently = failed[0]

    embeddings = [
        Embedding(id=doc_id, values=vec)
        for (doc_id, _), vec in zip(texts, results)
        if vec is not None
    ]
    report.succeeded = len(embeddings)
    return embeddings, report


def _fetch_one(
    cfg: EmbedConfig,
    http: requests.Session,
    limiter: RateLimiter,
    text: str,
    sleep: Callable[[float], None],
) -> tuple[np.ndarray, int]:
    """Issue one embedding request with retries; returns (vector, retries).
    Raises _PermanentFailure(reason, retries) when the item is hopeless."""
    url = cfg.endpoint_url.rstrip("/") + "/embeddings"
    headers = {"Authorization": f"Bearer {cfg.api_key}"}
    retries = 0
    for attempt in range(1, cfg.retry.max_attempts + 1):
        limiter.acquire()
        try:
            resp = http.post(
                url,
                json={"model": cfg.model_name, "input": text},
                headers=headers,
                timeout=cfg.timeout,
            )
            if resp.status_code == 200:
                try:
                    raw = resp.json()["data"][0]["embedding"]
                    vec = np.asarray(raw, dtype=np.float32)
                except (KeyError, IndexError, TypeError, ValueError) as exc:
                    raise _PermanentFailure(f"malformed response: {exc}", retries)
                if vec.ndim != 1 or vec.shape[0] != cfg.dimension:
                    raise _PermanentFailure(
                        f"embedding has dimension {vec.shape}, expected {cfg.dimension}",
                        retries,
                    )
                return vec, retries
            if resp.status_code in _TRANSIENT_STATUSES:
                raise _TransientFailure(f"HTTP {resp.status_code}")
            raise _PermanentFailure(f"HTTP {resp.status_code}", retries)
        except (requests.Timeout, requests.ConnectionError) as exc:
            transient: Exception = _TransientFailure(str(exc))
            reason = str(exc)
        except _TransientFailure as exc:
            transient = exc
            reason = str(exc)
        if attempt == cfg.retry.max_attempts:
            raise _PermanentFailure(f"retries exhausted: {reason}", retries)
        retries += 1
        sleep(cfg.retry.base_backoff * cfg.retry.multiplier ** (attempt - 1))
    raise _PermanentFailure("unreachable", retries)


def load_checkpoint(path: str, dimension: int) -> dict[str, np.ndarray]:
    """Read ids already embedded; tolerates a torn final line (or a torn
    trailing gzip member) left by an interrupted run."""
    if not os.path.exists(path) or os.path.getsize(path) == 0:
        return {}
    done: dict[str, np.ndarray] = {}
    reader = read_corpus(path, on_error="skip")
    try:
        for record in reader:
            if record.dimension != dimension:
                raise InvalidArgumentError(
                    f"checkpoint {path!r} has dimension {record.dimension}, "
                    f"expected {dimension}"
                )
            done[record.docid] = record.vector
    except (EOFError, gzip.BadGzipFile, zlib.error) as exc:
        logger.warning("checkpoint %s: truncated compressed tail (%s)", path, exc)
    if reader.bad_lines:
        logger.warning(
            "checkpoint %s: skipped %d unparseable line(s)", path, reader.bad_lines
        )
    return done
