"""Build a graph index over random vectors, search it, and compare the
results with the exact flat scan.

Run:  python3 demos/01_build_and_search.py
"""

import io
import time

import numpy as np

from vecsearch import (
    Embedding,
    FlatIndex,
    HnswIndex,
    HnswParams,
    SearchParams,
)

N_DOCS = 20_000
DIM = 64
SEED = 7

print(f"generating {N_DOCS} random unit vectors of dimension {DIM}")
rng = np.random.default_rng(SEED)
mat = rng.standard_normal((N_DOCS, DIM)).astype(np.float32)
mat /= np.linalg.norm(mat, axis=1, keepdims=True)
docs = [Embedding(f"doc{i:05d}", row) for i, row in enumerate(mat)]

print("building the graph index (m=16, efConstruction=100) ...")
t0 = time.perf_counter()
index = HnswIndex.build(docs, HnswParams(m=16, ef_construction=100, seed=SEED))
print(f"  built in {time.perf_counter() - t0:.1f}s, "
      f"max level {index.max_level}, entry point {index.entry_point}")

print("building the exact flat index for comparison ...")
flat = FlatIndex(DIM)
for d in docs:
    flat.add(d)
flat.freeze()

query = Embedding("query", mat[1234] + 0.05 * rng.standard_normal(DIM).astype(np.float32))

print("\ntop-5 by graph search (efSearch=200):")
for hit in index.search(query, SearchParams(ef_search=200, k=5)):
    print(f"  {hit.doc_id}  score={hit.score:.4f}")

print("top-5 by exact scan:")
for hit in flat.search(query, 5):
    print(f"  {hit.doc_id}  score={hit.score:.4f}")

print("\nsaving and reloading the index image ...")
buf = io.BytesIO()
index.freeze()
nbytes = index.save(buf)
buf.seek(0)
reloaded = HnswIndex.load(buf)
same = reloaded.search(query, SearchParams(ef_search=200, k=5)) == index.search(
    query, SearchParams(ef_search=200, k=5)
)
print(f"  image is {nbytes / 1e6:.1f} MB; reloaded index gives identical results: {same}")
