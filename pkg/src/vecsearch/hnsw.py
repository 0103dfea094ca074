"""Hierarchical navigable small-world graph index for approximate top-k
dot-product search.

The graph is layered: every node lives on layer 0, and each node is
assigned a maximal layer drawn from a geometric-like distribution
(``floor(-ln(u) * level_scale)``). A query descends greedily from the
single entry point through the upper layers, then runs a best-first
expansion with a bounded candidate pool (``ef_search``) on layer 0.

Construction follows the standard recipe: greedy descent to the node's
top layer, candidate expansion with pool size ``ef_construction`` on each
layer it occupies, diversity-heuristic neighbor selection, and re-pruning
of any neighbor list that overflows its cap (``m0`` on layer 0, ``m``
above).

Two phases. Build phase: single-threaded inserts via :meth:`HnswIndex.insert`
are deterministic under a fixed seed; :meth:`HnswIndex.build` may fan
inserts across threads with per-node locking, trading determinism for
speed. Frozen phase: immutable, unlimited concurrent searches.
"""

from __future__ import annotations

import io
import logging
import math
import os
import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import BinaryIO, Iterable

import numpy as np

from . import _kernels
from .errors import (
    CorruptIndexError,
    DimensionMismatchError,
    DuplicateIdError,
    EmptyIndexError,
    InvalidArgumentError,
)
from .vectors import Embedding, ScoredDoc, SearchResult, select_top_k_positions

logger = logging.getLogger(__name__)

_MAGIC = b"VECSHNSW"
_FORMAT_VERSION = 1
_U64_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class HnswParams:
    """Build-time parameters.

    m: max neighbors per node on layers above 0 (also the number of links
       initially selected for a new node on every layer).
    m0: max neighbors on layer 0; defaults to 2*m.
    ef_construction: candidate-pool size during insertion.
    level_scale: multiplier for level sampling; defaults to 1/ln(m).
    seed: seed for the level-sampling stream; defaults to fresh entropy.
    """

    m: int = 16
    m0: int | None = None
    ef_construction: int = 100
    level_scale: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.m < 2:
            raise InvalidArgumentError(f"m must be >= 2, got {self.m}")
        if self.m0 is None:
            object.__setattr__(self, "m0", 2 * self.m)
        if self.m0 < self.m:
            raise InvalidArgumentError(f"m0 must be >= m, got m0={self.m0} m={self.m}")
        if self.ef_construction < self.m:
            raise InvalidArgumentError(
                f"ef_construction must be >= m, got {self.ef_construction}"
            )
        if self.level_scale is None:
            object.__setattr__(self, "level_scale", 1.0 / math.log(self.m))
        if self.level_scale <= 0:
            raise InvalidArgumentError(
                f"level_scale must be positive, got {self.level_scale}"
            )
        if self.seed is not None:
            object.__setattr__(self, "seed", int(self.seed) & _U64_MASK)


@dataclass(frozen=True)
class SearchParams:
    """Query-time parameters: candidate-pool size and result count."""

    ef_search: int = 1000
    k: int = 1000

    def __post_init__(self):
        if self.ef_search < 1:
            raise InvalidArgumentError(f"ef_search must be >= 1, got {self.ef_search}")
        if self.k < 1:
            raise InvalidArgumentError(f"k must be >= 1, got {self.k}")


class HnswIndex:
    """Layered proximity graph over embeddings, searched by dot product."""

    def __init__(self, dimension: int, params: HnswParams | None = None):
        if dimension < 1:
            raise InvalidArgumentError(f"dimension must be >= 1, got {dimension}")
        self._dim = int(dimension)
        p = params if params is not None else HnswParams()
        if p.seed is None:
            p = HnswParams(
                m=p.m,
                m0=p.m0,
                ef_construction=p.ef_construction,
                level_scale=p.level_scale,
                seed=int.from_bytes(os.urandom(8), "little"),
            )
        self._params = p
        self._rng = np.random.Generator(np.random.PCG64(p.seed))
        self._size = 0
        self._capacity = 0
        self._vectors = np.empty((0, self._dim), dtype=np.float32)
        self._levels = np.empty(0, dtype=np.int32)
        self._ids: list[str] = []
        self._id_to_node: dict[str, int] = {}
        # One adjacency matrix + count vector per layer; rows are
        # zero-padded and guarded by the count.
        self._adj: list[np.ndarray] = []
        self._adj_counts: list[np.ndarray] = []
        self._entry = -1
        self._max_level = -1
        self._frozen = False
        self._entry_lock = threading.Lock()
        self._node_locks: list[threading.Lock] | None = None

    # -- introspection -------------------------------------------------

    @property
    def dimension(self) -> int:
        return self._dim

    @property
    def params(self) -> HnswParams:
        return self._params

    @property
    def frozen(self) -> bool:
        return self._frozen

    @property
    def max_level(self) -> int:
        return self._max_level

    @property
    def entry_point(self) -> str | None:
        return self._ids[self._entry] if self._entry >= 0 else None

    def __len__(self) -> int:
        return self._size

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._id_to_node

    def __repr__(self) -> str:
        return (
            f"HnswIndex(dim={self._dim}, size={self._size}, "
            f"max_level={self._max_level}, m={self._params.m}, "
            f"frozen={self._frozen})"
        )

    def level_of(self, doc_id: str) -> int:
        return int(self._levels[self._id_to_node[doc_id]])

    def neighbors(self, doc_id: str, layer: int = 0) -> list[str]:
        """Doc ids adjacent to ``doc_id`` on the given layer."""
        node = self._id_to_node[doc_id]
        if layer < 0 or layer > self._levels[node]:
            raise InvalidArgumentError(
                f"doc {doc_id!r} does not exist on layer {layer}"
            )
        cnt = int(self._adj_counts[layer][node])
        return [self._ids[j] for j in self._adj[layer][node, :cnt]]

    # -- construction ---------------------------------------------------

    def _draw_level(self) -> int:
        u = 1.0 - self._rng.random()  # in (0, 1]
        return int(-math.log(u) * self._params.level_scale)

    def _grow(self, needed: int) -> None:
        if needed <= self._capacity:
            return
        new_cap = max(needed, max(1024, self._capacity * 2))
        vec = np.zeros((new_cap, self._dim), dtype=np.float32)
        vec[: self._size] = self._vectors[: self._size]
        self._vectors = vec
        lev = np.zeros(new_cap, dtype=np.int32)
        lev[: self._size] = self._levels[: self._size]
        self._levels = lev
        for layer in range(len(self._adj)):
            width = self._adj[layer].shape[1]
            adj = np.zeros((new_cap, width), dtype=np.int32)
            adj[: self._size] = self._adj[layer][: self._size]
            self._adj[layer] = adj
            cnt = np.zeros(new_cap, dtype=np.int32)
            cnt[: self._size] = self._adj_counts[layer][: self._size]
            self._adj_counts[layer] = cnt
        self._capacity = new_cap

    def _ensure_layers(self, level: int) -> None:
        while len(self._adj) <= level:
            width = self._params.m0 if len(self._adj) == 0 else self._params.m
            self._adj.append(np.zeros((self._capacity, width), dtype=np.int32))
            self._adj_counts.append(np.zeros(self._capacity, dtype=np.int32))

    def _register(self, e: Embedding, level: int) -> int:
        if e.dimension != self._dim:
            raise DimensionMismatchError(self._dim, e.dimension, f"doc {e.id!r}")
        if e.id in self._id_to_node:
            raise DuplicateIdError(f"doc id {e.id!r} already present")
        self._grow(self._size + 1)
        self._ensure_layers(level)
        node = self._size
        self._vectors[node] = e.values
        self._levels[node] = level
        self._ids.append(e.id)
        self._id_to_node[e.id] = node
        self._size = node + 1
        return node

    def insert(self, e: Embedding) -> None:
        """Add one embedding (single-threaded build path; deterministic
        under a fixed seed)."""
        if self._frozen:
            raise InvalidArgumentError("index is frozen; no further inserts")
        level = self._draw_level()
        node = self._register(e, level)
        self._link(node, level, locked=False)

    def _link(self, node: int, level: int, locked: bool) -> None:
        vec = self._vectors[node]
        with self._entry_lock:
            entry = self._entry
            top = self._max_level
        if entry < 0:
            with self._entry_lock:
                if self._entry < 0:
                    self._entry = node
                    self._max_level = level
                    return
                entry = self._entry
                top = self._max_level
        p = self._params
        ep = entry
        ep_dist = -_kernels.dot_f32(self._vectors[ep], vec)
        for layer in range(top, level, -1):
            ep, ep_dist = _kernels.greedy_layer(
                self._vectors, self._adj[layer], self._adj_counts[layer],
                vec, ep, np.float32(ep_dist), self._size,
            )
        entries = np.array([ep], dtype=np.int32)
        entry_dists = np.array([ep_dist], dtype=np.float32)
        for layer in range(min(level, top), -1, -1):
            ids, dists = _kernels.search_layer(
                self._vectors, self._adj[layer], self._adj_counts[layer],
                vec, entries, entry_dists, p.ef_construction, self._size,
            )
            sel_ids, sel_dists = _kernels.select_neighbors(
                self._vectors, ids, dists, p.m
            )
            cap = p.m0 if layer == 0 else p.m
            if locked:
                self._link_locked(layer, node, sel_ids, sel_dists, cap)
            else:
                _kernels.link_new_node(
                    self._vectors, self._adj[layer], self._adj_counts[layer],
                    node, sel_ids, sel_dists, cap,
                )
            entries, entry_dists = ids, dists
        if level > top:
            with self._entry_lock:
                if level > self._max_level:
                    self._entry = node
                    self._max_level = level

    def _link_locked(self, layer, node, sel_ids, sel_dists, cap) -> None:
        assert self._node_locks is not None
        touched = sorted(set(int(i) for i in sel_ids) | {int(node)})
        for t in touched:
            self._node_locks[t].acquire()
        try:
            _kernels.link_new_node(
                self._vectors, self._adj[layer], self._adj_counts[layer],
                node, sel_ids, sel_dists, cap,
            )
        finally:
            for t in reversed(touched):
                self._node_locks[t].release()

    @classmethod
    def build(
        cls,
        embeddings: Iterable[Embedding],
        params: HnswParams | None = None,
        *,
        dimension: int | None = None,
        threads: int = 1,
    ) -> "HnswIndex":
        """Build an index over a batch of embeddings.

        With ``threads=1`` the result is identical to sequential
        :meth:`insert` calls. With more threads, inserts run concurrently
        under per-node locks; the graph (not the search contract) may vary
        between runs.
        """
        if threads < 1:
            raise InvalidArgumentError(f"threads must be >= 1, got {threads}")
        embs = list(embeddings)
        if dimension is None:
            if not embs:
                raise InvalidArgumentError(
                    "cannot infer dimension from an empty batch; pass dimension="
                )
            dimension = embs[0].dimension
        index = cls(dimension, params)
        if not embs:
            return index
        seen: set[str] = set()
        for e in embs:
            if e.id in seen:
                raise DuplicateIdError(f"doc id {e.id!r} already present")
            seen.add(e.id)
        # Pre-draw levels in input order so the level stream does not
        # depend on thread scheduling.
        levels = [index._draw_level() for _ in embs]
        index._grow(len(embs))
        index._ensure_layers(max(levels))
        nodes = [index._register(e, lv) for e, lv in zip(embs, levels)]
        if threads == 1:
            for node, lv in zip(nodes, levels):
                index._link(node, lv, locked=False)
        else:
            index._node_locks = [threading.Lock() for _ in embs]
            index._link(nodes[0], levels[0], locked=True)
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = [
                    pool.submit(index._link, node, lv, True)
                    for node, lv in zip(nodes[1:], levels[1:])
                ]
                for f in futures:
                    f.result()
            index._node_locks = None
        return index

    def freeze(self) -> None:
        """Flip to the immutable phase; required before saving."""
        self._frozen = True

    # -- search ----------------------------------------------------------

    def search(self, q: Embedding, sp: SearchParams | None = None) -> SearchResult:
        """Approximate top-k by dot product.

        Returns the best k of the visited candidate pool under the
        canonical ordering; scores are exact float32 dot products.
        """
        sp = sp if sp is not None else SearchParams()
        if self._size == 0:
            raise EmptyIndexError("hnsw index is empty")
        if q.dimension != self._dim:
            raise DimensionMismatchError(self._dim, q.dimension, "query")
        ef = sp.ef_search
        if ef < sp.k:
            logger.warning(
                "ef_search=%d < k=%d; clamping ef_search up to k", ef, sp.k
            )
            ef = sp.k
        entry = self._entry
        top = self._max_level
        qv = q.values
        ep = entry
        ep_dist = -_kernels.dot_f32(self._vectors[ep], qv)
        for layer in range(top, 0, -1):
            ep, ep_dist = _kernels.greedy_layer(
                self._vectors, self._adj[layer], self._adj_counts[layer],
                qv, ep, np.float32(ep_dist), self._size,
            )
        ids, dists = _kernels.search_layer(
            self._vectors, self._adj[0], self._adj_counts[0],
            qv, np.array([ep], dtype=np.int32),
            np.array([ep_dist], dtype=np.float32), ef, self._size,
        )
        # Kernel distances are negated dots; negation is exact in IEEE
        # arithmetic, so these scores match vectors.dot bit for bit.
        scores = -dists
        chosen = select_top_k_positions(scores, sp.k, lambda p: self._ids[ids[p]])
        docs = [ScoredDoc(self._ids[ids[p]], float(scores[p])) for p in chosen]
        docs.sort(key=lambda d: (-d.score, d.doc_id))
        return docs

    # -- serialization ----------------------------------------------------

    def save(self, sink: BinaryIO) -> int:
        """Write a versioned binary image; returns the byte count."""
        if not self._frozen:
            raise InvalidArgumentError("freeze() the index before saving")
        out = io.BytesIO()
        p = self._params
        out.write(_MAGIC)
        out.write(
            struct.pack(
                "<IIIIIdQQiq",
                _FORMAT_VERSION,
                self._dim,
                p.m,
                p.m0,
                p.ef_construction,
                p.level_scale,
                p.seed,
                self._size,
                self._max_level,
                self._entry,
            )
        )
        for doc_id in self._ids:
            raw = doc_id.encode("utf-8")
            out.write(struct.pack("<I", len(raw)))
            out.write(raw)
        out.write(self._levels[: self._size].astype("<i4").tobytes())
        out.write(self._vectors[: self._size].astype("<f4").tobytes())
        for layer in range(self._max_level + 1):
            counts = self._adj_counts[layer]
            adj = self._adj[layer]
            for node in range(self._size):
                if self._levels[node] < layer:
                    continue
                cnt = int(counts[node])
                out.write(struct.pack("<I", cnt))
                out.write(adj[node, :cnt].astype("<i4").tobytes())
        payload = out.getvalue()
        sink.write(payload)
        return len(payload)

    @classmethod
    def load(cls, source: BinaryIO) -> "HnswIndex":
        """Read an image written by :meth:`save`; the result is frozen and
        produces byte-identical search results to the saved index."""
        magic = _read_exact(source, len(_MAGIC), "magic")
        if magic != _MAGIC:
            raise CorruptIndexError("magic", f"expected {_MAGIC!r}, got {magic!r}")
        header = _read_exact(source, struct.calcsize("<IIIIIdQQiq"), "header")
        (
            version,
            dim,
            m,
            m0,
            efc,
            level_scale,
            seed,
            size,
            max_level,
            entry,
        ) = struct.unpack("<IIIIIdQQiq", header)
        if version != _FORMAT_VERSION:
            raise CorruptIndexError(
                "header", f"unsupported format version {version}"
            )
        try:
            params = HnswParams(
                m=m, m0=m0, ef_construction=efc, level_scale=level_scale, seed=seed
            )
            index = cls(dim, params)
        except InvalidArgumentError as exc:
            raise CorruptIndexError("header", str(exc)) from exc
        if size > 0 and not (0 <= entry < size):
            raise CorruptIndexError("header", f"entry point {entry} out of range")
        ids = []
        for i in range(size):
            (id_len,) = struct.unpack("<I", _read_exact(source, 4, "doc ids"))
            try:
                ids.append(_read_exact(source, id_len, "doc ids").decode("utf-8"))
            except UnicodeDecodeError as exc:
                raise CorruptIndexError("doc ids", str(exc)) from exc
        levels = np.frombuffer(
            _read_exact(source, 4 * size, "levels"), dtype="<i4"
        ).astype(np.int32)
        if size and (levels.min() < 0 or levels.max() != max_level):
            raise CorruptIndexError("levels", "levels disagree with header")
        vectors = np.frombuffer(
            _read_exact(source, 4 * size * dim, "vectors"), dtype="<f4"
        ).reshape(size, dim).astype(np.float32)
        index._grow(size)
        index._ensure_layers(max_level if size else 0)
        index._vectors[:size] = vectors
        index._levels[:size] = levels
        index._ids = ids
        index._id_to_node = {doc_id: i for i, doc_id in enumerate(ids)}
        if len(index._id_to_node) != size:
            raise CorruptIndexError("doc ids", "duplicate doc ids in image")
        index._size = size
        for layer in range(max_level + 1):
            section = f"adjacency layer {layer}"
            cap = index._adj[layer].shape[1]
            for node in range(size):
                if levels[node] < layer:
                    continue
                (cnt,) = struct.unpack("<I", _read_exact(source, 4, section))
                if cnt > cap:
                    raise CorruptIndexError(
                        section, f"neighbor count {cnt} exceeds cap {cap}"
                    )
                row = np.frombuffer(
                    _read_exact(source, 4 * cnt, section), dtype="<i4"
                )
                if cnt and (row.min() < 0 or row.max() >= size):
                    raise CorruptIndexError(section, "neighbor id out of range")
                index._adj[layer][node, :cnt] = row
                index._adj_counts[layer][node] = cnt
        index._entry = entry if size else -1
        index._max_level = max_level if size else -1
        index._frozen = True
        return index


def _read_exact(source: BinaryIO, n: int, section: str) -> bytes:
    data = source.read(n)
    if data is None or len(data) != n:
        raise CorruptIndexError(
            section, f"truncated image: wanted {n} bytes, got {0 if data is None else len(data)}"
        )
    return data
