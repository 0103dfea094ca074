import numpy as np
import pytest

from vecsearch import (
    DimensionMismatchError,
    DuplicateIdError,
    Embedding,
    EmptyIndexError,
    FlatIndex,
    InvalidArgumentError,
)

from conftest import as_embeddings, unit_vectors


def brute_force(ids, mat, q, k):
    """Independent reference: float64 per-doc dots, full sort, canonical order."""
    scores = [float(np.float32(np.dot(row.astype(np.float64), q.astype(np.float64)))) for row in mat]
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))
    return [(ids[i], scores[i]) for i in order[:k]]


class TestFlatAdd:
    def test_add_to_empty(self):
        idx = FlatIndex(4)
        idx.add(Embedding("d1", [1, 0, 0, 0]))
        assert len(idx) == 1
        assert "d1" in idx

    def test_duplicate_id_conflict(self):
        idx = FlatIndex(2)
        idx.add(Embedding("d1", [1, 0]))
        with pytest.raises(DuplicateIdError):
            idx.add(Embedding("d1", [0, 1]))

    def test_dimension_mismatch(self):
        idx = FlatIndex(2)
        with pytest.raises(DimensionMismatchError):
            idx.add(Embedding("d1", [1, 0, 0]))

    def test_thousand_distinct_all_retrievable(self):
        mat = unit_vectors(1000, 8, seed=3)
        idx = FlatIndex(8)
        for e in as_embeddings(mat):
            idx.add(e)
        assert len(idx) == 1000
        hits = idx.search(Embedding("q", mat[0]), k=1000)
        assert len(hits) == 1000
        assert len({h.doc_id for h in hits}) == 1000

    def test_frozen_rejects_add(self):
        idx = FlatIndex(2)
        idx.add(Embedding("d1", [1, 0]))
        idx.freeze()
        assert idx.frozen
        with pytest.raises(InvalidArgumentError):
            idx.add(Embedding("d2", [0, 1]))


class TestFlatSearch:
    def test_aligned_vector_wins(self):
        idx = FlatIndex(2)
        idx.add(Embedding("d1", [1, 0]))
        idx.add(Embedding("d2", [0, 1]))
        hits = idx.search(Embedding("q", [1, 0]), k=1)
        assert len(hits) == 1
        assert hits[0].doc_id == "d1"
        assert hits[0].score == 1.0

    def test_k_larger_than_size(self):
        mat = unit_vectors(5, 4, seed=4)
        idx = FlatIndex(4)
        for e in as_embeddings(mat):
            idx.add(e)
        assert len(idx.search(Embedding("q", mat[0]), k=50)) == 5

    def test_empty_index(self):
        with pytest.raises(EmptyIndexError):
            FlatIndex(2).search(Embedding("q", [1, 0]), k=1)

    def test_query_dimension_mismatch(self):
        idx = FlatIndex(2)
        idx.add(Embedding("d1", [1, 0]))
        with pytest.raises(DimensionMismatchError):
            idx.search(Embedding("q", [1, 0, 0]), k=1)

    def test_k_zero_rejected(self):
        idx = FlatIndex(2)
        idx.add(Embedding("d1", [1, 0]))
        with pytest.raises(InvalidArgumentError):
            idx.search(Embedding("q", [1, 0]), k=0)

    def test_matches_brute_force_oracle(self):
        mat = unit_vectors(5000, 16, seed=5)
        ids = [f"d{i:04d}" for i in range(5000)]
        idx = FlatIndex(16)
        for doc_id, row in zip(ids, mat):
            idx.add(Embedding(doc_id, row))
        queries = unit_vectors(50, 16, seed=6)
        for q in queries:
            got = [(h.doc_id, h.score) for h in idx.search(Embedding("q", q), k=10)]
            expect = brute_force(ids, mat, q, 10)
            assert [g[0] for g in got] == [e[0] for e in expect]
            for (_, gs), (_, es) in zip(got, expect):
                assert gs == pytest.approx(es, rel=1e-5, abs=1e-6)

    def test_integer_vectors_with_exact_ties_match_oracle(self):
        # small-integer components make dots exact in float32 and force
        # genuine score ties, exercising the doc-id tie-break
        rng = np.random.default_rng(7)
        mat = rng.integers(-3, 4, size=(800, 8)).astype(np.float32)
        ids = [f"d{i:03d}" for i in range(800)]
        idx = FlatIndex(8)
        for doc_id, row in zip(ids, mat):
            idx.add(Embedding(doc_id, row))
        for qi in range(20):
            q = rng.integers(-3, 4, size=8).astype(np.float32)
            got = [(h.doc_id, h.score) for h in idx.search(Embedding("q", q), k=25)]
            assert got == brute_force(ids, mat, q, 25)

    def test_deterministic_and_scores_non_increasing(self):
        mat = unit_vectors(300, 12, seed=8)
        idx = FlatIndex(12)
        for e in as_embeddings(mat):
            idx.add(e)
        q = Embedding("q", unit_vectors(1, 12, seed=9)[0])
        first = idx.search(q, k=40)
        second = idx.search(q, k=40)
        assert first == second
        scores = [h.score for h in first]
        assert all(a >= b for a, b in zip(scores, scores[1:]))

    def test_scores_recompute_independently(self):
        mat = unit_vectors(200, 24, seed=10)
        idx = FlatIndex(24)
        for e in as_embeddings(mat):
            idx.add(e)
        qv = unit_vectors(1, 24, seed=11)[0]
        lookup = {e.id: e.values for e in as_embeddings(mat)}
        for h in idx.search(Embedding("q", qv), k=20):
            ref = float(
                np.dot(lookup[h.doc_id].astype(np.float64), qv.astype(np.float64))
            )
            assert h.score == pytest.approx(ref, rel=1e-5, abs=1e-6)

    def test_full_ranking_is_total(self):
        mat = unit_vectors(128, 6, seed=12)
        idx = FlatIndex(6)
        embs = as_embeddings(mat)
        for e in embs:
            idx.add(e)
        hits = idx.search(Embedding("q", mat[3]), k=len(embs))
        assert sorted(h.doc_id for h in hits) == sorted(e.id for e in embs)
