"""Compiled kernels for graph construction and traversal.

Everything here operates on plain numpy arrays so the hot loops run as
machine code with the GIL released. Distances are negated dot products
(larger dot = closer); scores handed back to callers are exact float32
dot-product values, bit-identical to ``vectors.dot``.

Adjacency is stored dense: one int32 row per node and layer, plus a
parallel count array. Rows may be read concurrently while another thread
appends, so every kernel bounds-checks neighbor ids against ``n_valid``
instead of trusting the row contents.
"""

from __future__ import annotations

import numpy as np
from numba import float32, float64, njit

_OPTS = dict(cache=True, nogil=True)


@njit(**_OPTS)
def dot_f32(a, b):
    """Dot product of two float32 vectors, accumulated in float64 and
    rounded once to float32."""
    acc = 0.0
    for i in range(a.shape[0]):
        acc += float64(a[i]) * float64(b[i])
    return float32(acc)


# Binary min-heaps over parallel (key, id) arrays. Root holds the
# smallest key; callers pick the key sign to get min- or max-behavior.


@njit(**_OPTS)
def _heap_push(keys, ids, size, key, ident):
    i = size
    keys[i] = key
    ids[i] = ident
    while i > 0:
        parent = (i - 1) >> 1
        if keys[parent] <= keys[i]:
            break
        keys[parent], keys[i] = keys[i], keys[parent]
        ids[parent], ids[i] = ids[i], ids[parent]
        i = parent
    return size + 1


@njit(**_OPTS)
def _heap_pop(keys, ids, size):
    size -= 1
    keys[0] = keys[size]
    ids[0] = ids[size]
    i = 0
    while True:
        left = 2 * i + 1
        right = left + 1
        smallest = i
        if left < size and keys[left] < keys[smallest]:
            smallest = left
        if right < size and keys[right] < keys[smallest]:
            smallest = right
        if smallest == i:
            break
        keys[smallest], keys[i] = keys[i], keys[smallest]
        ids[smallest], ids[i] = ids[i], ids[smallest]
        i = smallest
    return size


@njit(**_OPTS)
def greedy_layer(vecs, adj, counts, q, entry, entry_dist, n_valid):
    """Pool-size-1 descent on one layer: hop to the closest neighbor until
    no neighbor improves. Returns (node, dist)."""
    cur = entry
    cur_d = entry_dist
    improved = True
    while improved:
        improved = False
        row = adj[cur]
        cnt = counts[cur]
        best = cur
        best_d = cur_d
        for jj in range(cnt):
            j = row[jj]
            if j < 0 or j >= n_valid:
                continue
            d = -dot_f32(vecs[j], q)
            if d < best_d:
                best = j
                best_d = d
        if best != cur:
            cur = best
            cur_d = best_d
            improved = True
    return cur, cur_d


@njit(**_OPTS)
def search_layer(vecs, adj, counts, q, entries, entry_dists, ef, n_valid):
    """Best-first expansion on one layer with a bounded result pool.

    Returns (ids, dists) of at most ``ef`` nodes, unsorted. ``dists`` are
    negated dots; negate again for exact float32 scores.
    """
    n = vecs.shape[0]
    visited = np.zeros(n, dtype=np.uint8)
    # Candidate heap: min by distance (closest popped first). Result heap:
    # min by dot (root is the worst entry kept, evicted on overflow).
    cand_d = np.empty(n, dtype=np.float32)
    cand_i = np.empty(n, dtype=np.int32)
    res_d = np.empty(ef + 1, dtype=np.float32)
    res_i = np.empty(ef + 1, dtype=np.int32)
    nc = 0
    nr = 0
    for t in range(entries.shape[0]):
        e = entries[t]
        if e < 0 or e >= n_valid or visited[e]:
            continue
        visited[e] = 1
        d = entry_dists[t]
        nc = _heap_push(cand_d, cand_i, nc, d, e)
        nr = _heap_push(res_d, res_i, nr, -d, e)
        if nr > ef:
            nr = _heap_pop(res_d, res_i, nr)
    while nc > 0:
        d0 = cand_d[0]
        c = cand_i[0]
        nc = _heap_pop(cand_d, cand_i, nc)
        if nr >= ef and d0 > -res_d[0]:
            break
        row = adj[c]
        cnt = counts[c]
        for jj in range(cnt):
            j = row[jj]
            if j < 0 or j >= n_valid or visited[j]:
                continue
            visited[j] = 1
            dj = -dot_f32(vecs[j], q)
            if nr < ef or dj < -res_d[0]:
                nc = _heap_push(cand_d, cand_i, nc, dj, j)
                nr = _heap_push(res_d, res_i, nr, -dj, j)
                if nr > ef:
                    nr = _heap_pop(res_d, res_i, nr)
    out_i = np.empty(nr, dtype=np.int32)
    out_d = np.empty(nr, dtype=np.float32)
    for t in range(nr):
        out_i[t] = res_i[t]
        out_d[t] = -res_d[t]
    return out_i, out_d


@njit(**_OPTS)
def _select_into(vecs, cand_ids, cand_dists, n_cand, max_m, out_ids, out_dists):
    """Diversity selection: walk candidates closest-first and keep one only
    if no already-kept neighbor is strictly closer to it than the target is.
    Writes into out arrays, returns the kept count."""
    order = np.argsort(cand_dists[:n_cand])
    kept = 0
    for oi in range(n_cand):
        if kept >= max_m:
            break
        c = cand_ids[order[oi]]
        d_target = cand_dists[order[oi]]
        ok = True
        for t in range(kept):
            # dist(c, kept) < dist(c, target) <=> dot(c, kept) > dot(c, target)
            if dot_f32(vecs[c], vecs[out_ids[t]]) > -d_target:
                ok = False
                break
        if ok:
            out_ids[kept] = c
            out_dists[kept] = d_target
            kept += 1
    return kept


@njit(**_OPTS)
def select_neighbors(vecs, cand_ids, cand_dists, max_m):
    """Diversity-pruned neighbor choice from a candidate pool; returns
    (ids, dists) with at most max_m entries."""
    n_cand = cand_ids.shape[0]
    out_ids = np.empty(n_cand, dtype=np.int32)
    out_dists = np.empty(n_cand, dtype=np.float32)
    kept = _select_into(vecs, cand_ids, cand_dists, n_cand, max_m, out_ids, out_dists)
    return out_ids[:kept].copy(), out_dists[:kept].copy()


@njit(**_OPTS)
def link_new_node(vecs, adj, counts, new_id, sel_ids, sel_dists, cap):
    """Wire a new node into one layer: write its own neighbor row, then add
    the reverse edges, re-pruning any neighbor whose row overflows ``cap``
    with the same diversity heuristic."""
    nsel = sel_ids.shape[0]
    for t in range(nsel):
        adj[new_id, t] = sel_ids[t]
    counts[new_id] = nsel
    scratch_ids = np.empty(cap + 1, dtype=np.int32)
    scratch_d = np.empty(cap + 1, dtype=np.float32)
    keep_ids = np.empty(cap + 1, dtype=np.int32)
    keep_d = np.empty(cap + 1, dtype=np.float32)
    for t in range(nsel):
        nb = sel_ids[t]
        c = counts[nb]
        if c < cap:
            adj[nb, c] = new_id
            counts[nb] = c + 1
        else:
            for u in range(c):
                other = adj[nb, u]
                scratch_ids[u] = other
                scratch_d[u] = -dot_f32(vecs[other], vecs[nb])
            scratch_ids[c] = new_id
            scratch_d[c] = sel_dists[t]
            kept = _select_into(vecs, scratch_ids, scratch_d, c + 1, cap, keep_ids, keep_d)
            for u in range(kept):
                adj[nb, u] = keep_ids[u]
            counts[nb] = kept
