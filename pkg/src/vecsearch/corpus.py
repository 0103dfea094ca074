"""Streaming reader/writer for JSON-lines vector corpora and query files.

One JSON object per line, ``{"docid": ..., "vector": [...]}`` with an
optional ``"text"`` field; unknown keys are ignored. Files may be gzip
compressed; readers sniff the two magic bytes unless told explicitly.
Vector components live as 32-bit floats: parsed values are rounded to the
nearest float32, and the writer emits the shortest decimal string that
parses back to the identical float32.
"""

from __future__ import annotations

import gzip
import io
import json
import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass
from typing import IO, Iterable, Iterator

import numpy as np

from .errors import InvalidArgumentError, ParseError

logger = logging.getLogger(__name__)

_GZIP_MAGIC = b"\x1f\x8b"


@dataclass(frozen=True)
class CorpusRecord:
    """One corpus line: a doc id, its vector, and optionally the source text."""

    docid: str
    vector: np.ndarray
    text: str | None = None

    def __post_init__(self):
        if not self.docid:
            raise InvalidArgumentError("docid must be a non-empty string")
        arr = np.asarray(self.vector, dtype=np.float32)
        if arr.ndim != 1 or arr.size == 0:
            raise InvalidArgumentError(
                f"vector for {self.docid!r} must be a non-empty 1-d sequence"
            )
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError(
                f"vector for {self.docid!r} contains non-finite components"
            )
        object.__setattr__(self, "vector", arr)

    @property
    def dimension(self) -> int:
        return int(self.vector.shape[0])


def format_float32(value) -> str:
    """Shortest decimal string that parses back to the identical float32."""
    v = np.float32(value)
    a = abs(float(v))
    if a != 0.0 and (a < 1e-4 or a >= 1e16):
        return np.format_float_scientific(v, unique=True, trim="0")
    return np.format_float_positional(v, unique=True, trim="0")


def _reject_constant(token: str):
    raise ValueError(f"non-finite JSON token {token!r} not permitted")


@contextmanager
def _open_read(source, gz: bool | None):
    """Yield a binary stream, transparently gunzipping. ``source`` is a
    path or a binary file object; file objects are not closed."""
    own = isinstance(source, (str, os.PathLike))
    raw: IO[bytes] = open(source, "rb") if own else source
    try:
        buffered = raw if isinstance(raw, io.BufferedReader) else io.BufferedReader(raw)  # type: ignore[arg-type]
        use_gz = gz if gz is not None else buffered.peek(2)[:2] == _GZIP_MAGIC
        yield gzip.GzipFile(fileobj=buffered, mode="rb") if use_gz else buffered
    finally:
        if own:
            raw.close()


@contextmanager
def _open_write(sink, gz: bool, append: bool = False):
    own = isinstance(sink, (str, os.PathLike))
    raw: IO[bytes] = open(sink, "ab" if append else "wb") if own else sink
    try:
        if gz:
            with gzip.GzipFile(fileobj=raw, mode="wb") as z:
                yield z
        else:
            yield raw
    finally:
        if own:
            raw.close()


class CorpusReader:
    """Iterator over corpus records with line accounting.

    ``on_error="raise"`` fails fast on a malformed line; ``"skip"`` counts
    it in :attr:`bad_lines` and keeps going. Dimension drift is always
    fatal: the first record fixes the corpus dimension.
    """

    def __init__(self, source, gz: bool | None = None, on_error: str = "raise"):
        if on_error not in ("raise", "skip"):
            raise InvalidArgumentError(
                f"on_error must be 'raise' or 'skip', got {on_error!r}"
            )
        self._source = source
        self._gz = gz
        self._on_error = on_error
        self.lines_read = 0
        self.bad_lines = 0
        self.dimension: int | None = None

    def __iter__(self) -> Iterator[CorpusRecord]:
        with _open_read(self._source, self._gz) as stream:
            for line_no, raw in enumerate(stream, start=1):
                self.lines_read = line_no
                line = raw.strip()
                if not line:
                    continue
                try:
                    record = self._parse_line(line, line_no)
                except ParseError:
                    if self._on_error == "raise":
                        raise
                    self.bad_lines += 1
                    logger.warning("skipping malformed corpus line %d", line_no)
                    continue
                if self.dimension is None:
                    self.dimension = record.dimension
                elif record.dimension != self.dimension:
                    raise ParseError(
                        f"dimension drift: corpus dimension is {self.dimension} "
                        f"but doc {record.docid!r} has {record.dimension}",
                        line_no,
                    )
                yield record

    def _parse_line(self, line: bytes, line_no: int) -> CorpusRecord:
        try:
            obj = json.loads(line, parse_constant=_reject_constant)
        except (ValueError, UnicodeDecodeError) as exc:
            raise ParseError(f"invalid JSON: {exc}", line_no) from exc
        if not isinstance(obj, dict):
            raise ParseError("record is not a JSON object", line_no)
        docid = obj.get("docid")
        if not isinstance(docid, str) or not docid:
            raise ParseError("missing or empty 'docid'", line_no)
        vector = obj.get("vector")
        if not isinstance(vector, list) or not vector:
            raise ParseError(f"doc {docid!r}: missing or empty 'vector'", line_no)
        text = obj.get("text")
        if text is not None and not isinstance(text, str):
            raise ParseError(f"doc {docid!r}: 'text' must be a string", line_no)
        try:
            return CorpusRecord(docid=docid, vector=vector, text=text)
        except (InvalidArgumentError, TypeError, ValueError) as exc:
            raise ParseError(f"doc {docid!r}: {exc}", line_no) from exc


def read_corpus(source, gz: bool | None = None, on_error: str = "raise") -> CorpusReader:
    """Stream corpus records from a path or binary file object."""
    return CorpusReader(source, gz=gz, on_error=on_error)


def format_record(record: CorpusRecord) -> str:
    """Serialize one record to its JSON line (no trailing newline)."""
    parts = [
        '{"docid": ',
        json.dumps(record.docid, ensure_ascii=False),
        ', "vector": [',
        ", ".join(format_float32(v) for v in record.vector),
        "]",
    ]
    if record.text is not None:
        parts.append(', "text": ')
        parts.append(json.dumps(record.text, ensure_ascii=False))
    parts.append("}")
    return "".join(parts)


def write_corpus(records: Iterable[CorpusRecord], sink, gz: bool = False) -> int:
    """Write records as JSON lines (optionally gzipped); returns the count.

    Streams record by record; memory use does not depend on corpus size.
    """
    count = 0
    dimension = None
    with _open_write(sink, gz) as stream:
        for record in records:
            if dimension is None:
                dimension = record.dimension
            elif record.dimension != dimension:
                raise InvalidArgumentError(
                    f"dimension drift while writing: {dimension} then "
                    f"{record.dimension} (doc {record.docid!r})"
                )
            stream.write(format_record(record).encode("utf-8"))
            stream.write(b"\n")
            count += 1
    return count


class TextReader:
    """Iterator over ``{"docid": ..., "text": ...}`` JSON lines."""

    def __init__(self, source, gz: bool | None = None, on_error: str = "raise"):
        if on_error not in ("raise", "skip"):
            raise InvalidArgumentError(
                f"on_error must be 'raise' or 'skip', got {on_error!r}"
            )
        self._source = source
        self._gz = gz
        self._on_error = on_error
        self.lines_read = 0
        self.bad_lines = 0

    def __iter__(self) -> Iterator[tuple[str, str]]:
        with _open_read(self._source, self._gz) as stream:
            for line_no, raw in enumerate(stream, start=1):
                self.lines_read = line_no
                line = raw.strip()
                if not line:
                    continue
                try:
                    yield self._parse_line(line, line_no)
                except ParseError:
                    if self._on_error == "raise":
                        raise
                    self.bad_lines += 1
                    logger.warning("skipping malformed text line %d", line_no)

    def _parse_line(self, line: bytes, line_no: int) -> tuple[str, str]:
        try:
            obj = json.loads(line)
        except (ValueError, UnicodeDecodeError) as exc:
            raise ParseError(f"invalid JSON: {exc}", line_no) from exc
        if not isinstance(obj, dict):
            raise ParseError("record is not a JSON object", line_no)
        docid = obj.get("docid")
        text = obj.get("text")
        if not isinstance(docid, str) or not docid:
            raise ParseError("missing or empty 'docid'", line_no)
        if not isinstance(text, str):
            raise ParseError(f"doc {docid!r}: missing 'text'", line_no)
        return docid, text


def read_texts(source, gz: bool | None = None, on_error: str = "raise") -> TextReader:
    """Stream (docid, text) pairs from a path or binary file object."""
    return TextReader(source, gz=gz, on_error=on_error)
