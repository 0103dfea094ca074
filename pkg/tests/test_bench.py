import threading

import pytest

from vecsearch import Embedding, HnswIndex, HnswParams, InvalidArgumentError, run_bench

from conftest import as_embeddings, unit_vectors


class CountingIndex:
    """Search stub that records every call; duck-types HnswIndex.search."""

    def __init__(self):
        self.calls = 0
        self._lock = threading.Lock()

    def search(self, q, sp):
        with self._lock:
            self.calls += 1
        return []


def make_queries(n=10, dim=8, seed=60):
    return [Embedding(f"q{i}", row) for i, row in enumerate(unit_vectors(n, dim, seed))]


class TestAccounting:
    def test_trials_plus_warmup_pass_count(self):
        idx = CountingIndex()
        queries = make_queries(10)
        report = run_bench(idx, queries, k=5, ef_search=10, trials=4, warmup=1)
        assert idx.calls == 5 * 10  # exactly 5 full passes
        assert report.trials == 4
        assert report.warmup_runs == 1
        assert len(report.trial_seconds) == 4

    def test_qps_recomputable_from_trial_times(self):
        idx = CountingIndex()
        queries = make_queries(7)
        report = run_bench(idx, queries, k=5, ef_search=10, trials=4, warmup=1)
        recomputed = sum(len(queries) / t for t in report.trial_seconds) / report.trials
        assert report.queries_per_second == pytest.approx(recomputed, rel=1e-6)

    def test_zero_warmup_allowed(self):
        idx = CountingIndex()
        run_bench(idx, make_queries(3), k=5, ef_search=10, trials=2, warmup=0)
        assert idx.calls == 6

    def test_validation(self):
        idx = CountingIndex()
        with pytest.raises(InvalidArgumentError):
            run_bench(idx, [], k=5, ef_search=10)
        with pytest.raises(InvalidArgumentError):
            run_bench(idx, make_queries(2), trials=0)
        with pytest.raises(InvalidArgumentError):
            run_bench(idx, make_queries(2), warmup=-1)
        with pytest.raises(InvalidArgumentError):
            run_bench(idx, make_queries(2), threads=0)


@pytest.fixture(scope="module")
def index():
    mat = unit_vectors(2000, 32, seed=61)
    idx = HnswIndex.build(as_embeddings(mat), HnswParams(seed=61))
    idx.freeze()
    return idx


class TestRealIndex:
    @pytest.mark.parametrize("threads", [1, 8])
    def test_thread_counts_produce_valid_reports(self, index, threads):
        queries = make_queries(20, dim=32, seed=62)
        report = run_bench(
            index, queries, k=10, ef_search=50, threads=threads, trials=2, warmup=1
        )
        assert report.threads == threads
        assert report.k == 10
        assert report.ef_search == 50
        assert report.queries_per_second > 0
        assert all(t > 0 for t in report.trial_seconds)

    def test_report_text_mentions_everything(self, index):
        queries = make_queries(5, dim=32, seed=63)
        report = run_bench(index, queries, k=3, ef_search=20, trials=2, warmup=1)
        text = report.to_text()
        assert "mean QPS" in text
        assert "trial 2" in text
