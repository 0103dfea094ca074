"""Core value types and the dot-product similarity every search path shares.

Vectors are float32, dense, and immutable once wrapped in an
:class:`Embedding`. Rankings follow one canonical ordering everywhere:
score descending, then doc id ascending, so that equal-score results are
deterministic.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _kernels
from .errors import DimensionMismatchError, InvalidArgumentError


@dataclass(frozen=True)
class Embedding:
    """A dense vector attached to a document or query identifier.

    ``values`` is copied into a read-only, contiguous float32 array; all
    components must be finite.
    """

    id: str
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float32, copy=True)
        if arr.ndim != 1 or arr.size == 0:
            raise InvalidArgumentError(
                f"embedding values must be a non-empty 1-d sequence, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError(
                f"embedding {self.id!r} contains non-finite components"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class ScoredDoc:
    """One ranked hit: a document id and its dot-product score."""

    doc_id: str
    score: float


# A ranked result list for one query: ScoredDocs in canonical order
# (score descending, doc_id ascending), doc ids unique.
SearchResult = list[ScoredDoc]


def canonical_order(docs: Iterable[ScoredDoc]) -> SearchResult:
    """Sort hits by score descending, ties by doc id ascending."""
    return sorted(docs, key=lambda d: (-d.score, d.doc_id))


def dot(a: Embedding, b: Embedding) -> float:
    """Dot product of two equal-dimension embeddings.

    Accumulates in float64 and rounds once to float32, so the result is the
    exact score every index in this package reports.
    """
    if a.dimension != b.dimension:
        raise DimensionMismatchError(a.dimension, b.dimension)
    return float(_kernels.dot_f32(a.values, b.values))


def select_top_k_positions(scores: np.ndarray, k: int, id_at) -> list[int]:
    """Positions of the k best entries of a float32 score array.

    Ties at the cutoff score are broken by ``id_at(pos)`` ascending so the
    choice is deterministic; the returned positions are unordered.
    argpartition picks an arbitrary subset among tied entries, hence the
    explicit cutoff handling.
    """
    n = int(scores.shape[0])
    kk = min(k, n)
    if kk == n:
        return list(range(n))
    part = np.argpartition(scores, n - kk)[n - kk:]
    cutoff = scores[part].min()
    above = np.flatnonzero(scores > cutoff)
    tied = sorted(np.flatnonzero(scores == cutoff).tolist(), key=id_at)
    return above.tolist() + tied[: kk - above.size]


class _WorstFirst:
    """Heap adapter ordering entries worst-first under the canonical
    ordering, so the root of a min-heap is the next entry to evict."""

    __slots__ = ("doc",)

    def __init__(self, doc: ScoredDoc):
        self.doc = doc

    def __lt__(self, other: "_WorstFirst") -> bool:
        if self.doc.score != other.doc.score:
            return self.doc.score < other.doc.score
        return self.doc.doc_id > other.doc.doc_id


def top_k_merge(candidates: Iterable[ScoredDoc], k: int) -> SearchResult:
    """Keep the k best entries of a stream under the canonical ordering.

    Bounded memory: holds at most k entries at any point. Feeding the
    output back in returns it unchanged. Doc ids are assumed unique within
    the stream.
    """
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    heap: list[_WorstFirst] = []
    for doc in candidates:
        entry = _WorstFirst(doc)
        if len(heap) < k:
            heapq.heappush(heap, entry)
        elif heap[0] < entry:
            heapq.heapreplace(heap, entry)
    return canonical_order(e.doc for e in heap)
