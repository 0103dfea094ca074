"""Exact brute-force top-k search over all stored embeddings.

The flat index scans every vector with one BLAS matrix-vector product and
keeps the best k, so it is the correctness oracle for the approximate
index: no graph, no randomness, exact results.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DimensionMismatchError,
    DuplicateIdError,
    EmptyIndexError,
    InvalidArgumentError,
)
from .vectors import Embedding, ScoredDoc, SearchResult, select_top_k_positions


class FlatIndex:
    """Append-only exhaustive index; freeze before sharing across threads."""

    def __init__(self, dimension: int):
        if dimension < 1:
            raise InvalidArgumentError(f"dimension must be >= 1, got {dimension}")
        self._dim = int(dimension)
        self._ids: list[str] = []
        self._id_set: set[str] = set()
        self._pending: list[np.ndarray] = []
        self._matrix = np.empty((0, self._dim), dtype=np.float32)
        self._frozen = False

    @property
    def dimension(self) -> int:
        return self._dim

    @property
    def frozen(self) -> bool:
        return self._frozen

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._id_set

    def add(self, e: Embedding) -> None:
        """Store one embedding. Duplicate ids and wrong dimensions are
        rejected."""
        if self._frozen:
            raise InvalidArgumentError("index is frozen; no further adds")
        if e.dimension != self._dim:
            raise DimensionMismatchError(self._dim, e.dimension, f"doc {e.id!r}")
        if e.id in self._id_set:
            raise DuplicateIdError(f"doc id {e.id!r} already present")
        self._ids.append(e.id)
        self._id_set.add(e.id)
        self._pending.append(e.values)

    def freeze(self) -> None:
        """Pack pending vectors; the index becomes immutable and safe for
        unlimited concurrent searches."""
        self._pack()
        self._frozen = True

    def _pack(self) -> None:
        if self._pending:
            block = np.vstack(self._pending)
            self._matrix = (
                np.vstack([self._matrix, block]) if self._matrix.size else block
            )
            self._pending.clear()

    def search(self, q: Embedding, k: int) -> SearchResult:
        """Exact top-k by dot product under the canonical ordering."""
        if k < 1:
            raise InvalidArgumentError(f"k must be >= 1, got {k}")
        if not self._ids:
            raise EmptyIndexError("flat index is empty")
        if q.dimension != self._dim:
            raise DimensionMismatchError(self._dim, q.dimension, "query")
        self._pack()
        scores = self._matrix @ q.values
        chosen = select_top_k_positions(scores, k, lambda i: self._ids[i])
        docs = [ScoredDoc(self._ids[i], float(scores[i])) for i in chosen]
        docs.sort(key=lambda d: (-d.score, d.doc_id))
        return docs
