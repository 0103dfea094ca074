"""Measure query throughput with the warmup-then-trials methodology.

Each configuration runs one untimed warmup pass and four timed trials
over the full query set; QPS is averaged over the trials. Searches
release the interpreter lock inside the compiled kernels, so threading
scales with the machine's available cores.

Run:  python3 demos/04_throughput.py
"""

import os

import numpy as np

from vecsearch import Embedding, HnswIndex, HnswParams, run_bench

N_DOCS = 20_000
N_QUERIES = 100
DIM = 64
K = 100

rng = np.random.default_rng(29)
mat = rng.standard_normal((N_DOCS, DIM)).astype(np.float32)
mat /= np.linalg.norm(mat, axis=1, keepdims=True)
docs = [Embedding(f"doc{i:05d}", row) for i, row in enumerate(mat)]

qmat = rng.standard_normal((N_QUERIES, DIM)).astype(np.float32)
qmat /= np.linalg.norm(qmat, axis=1, keepdims=True)
queries = [Embedding(f"q{i}", row) for i, row in enumerate(qmat)]

print(f"indexing {N_DOCS} vectors ...")
index = HnswIndex.build(docs, HnswParams(seed=29))
index.freeze()

print(f"machine reports {os.cpu_count()} CPUs; expect QPS to flatten beyond that\n")
for threads in (1, 2, 4, 8):
    report = run_bench(
        index, queries, k=K, ef_search=500, threads=threads, trials=4, warmup=1
    )
    per_trial = ", ".join(f"{t:.2f}s" for t in report.trial_seconds)
    print(f"threads={threads}: mean {report.queries_per_second:7.1f} QPS  "
          f"(trials: {per_trial})")
