"""Query-throughput measurement: warmup passes followed by timed trials.

A pass runs every query once, fanning out across a thread pool when
``threads > 1`` (searches release the GIL inside the compiled kernels, so
threads scale). QPS is query count divided by trial wall time, averaged
over the timed trials; warmup passes are excluded.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import InvalidArgumentError
from .hnsw import SearchParams
from .vectors import Embedding

@dataclass(frozen=True)
class BenchReport:
    queries_per_second: float
    trials: int
    warmup_runs: int
    threads: int
    k: int
    ef_search: int
    query_count: int
    trial_seconds: tuple[float, ...] = field(default_factory=tuple)

    def to_text(self) -> str:
        lines = [
            f"queries:        {self.query_count}",
            f"threads:        {self.threads}",
            f"k:              {self.k}",
            f"ef_search:      {self.ef_search}",
            f"warmup runs:    {self.warmup_runs}",
            f"trials:         {self.trials}",
        ]
        for i, t in enumerate(self.trial_seconds, start=1):
            lines.append(f"trial {i}:        {t:.3f} s ({self.query_count / t:.2f} QPS)")
        lines.append(f"mean QPS:       {self.queries_per_second:.2f}")
        return "\n".join(lines)


def run_bench(
    index,
    queries: Sequence[Embedding],
    *,
    k: int = 1000,
    ef_search: int = 1000,
    threads: int = 1,
    trials: int = 4,
    warmup: int = 1,
    clock: Callable[[], float] = time.perf_counter,
) -> BenchReport:
    """Measure search throughput on any index exposing ``search(q, sp)``."""
    if not queries:
        raise InvalidArgumentError("queries must be non-empty")
    if trials < 1:
        raise InvalidArgumentError(f"trials must be >= 1, got {trials}")
    if warmup < 0:
        raise InvalidArgumentError(f"warmup must be >= 0, got {warmup}")
    if threads < 1:
        raise InvalidArgumentError(f"threads must be >= 1, got {threads}")
    sp = SearchParams(ef_search=ef_search, k=k)

    def one_pass() -> None:
        if threads == 1:
            for q in queries:
                index.search(q, sp)
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                for f in [pool.submit(index.search, q, sp) for q in queries]:
                    f.result()

    for _ in range(warmup):
        one_pass()
    times = []
    for _ in range(trials):
        start = clock()
        one_pass()
        times.append(clock() - start)
    qps = sum(len(queries) / t for t in times) / trials
    return BenchReport(
        queries_per_second=qps,
        trials=trials,
        warmup_runs=warmup,
        threads=threads,
        k=k,
        ef_search=ef_search,
        query_count=len(queries),
        trial_seconds=tuple(times),
    )
