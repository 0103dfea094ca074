import numpy as np
import pytest

from vecsearch import Embedding


def unit_vectors(n: int, dim: int, seed: int) -> np.ndarray:
    """n random float32 vectors scaled to unit Euclidean norm."""
    rng = np.random.default_rng(seed)
    mat = rng.standard_normal((n, dim)).astype(np.float32)
    mat /= np.linalg.norm(mat, axis=1, keepdims=True)
    return mat.astype(np.float32)


def as_embeddings(mat: np.ndarray, prefix: str = "d") -> list[Embedding]:
    width = len(str(mat.shape[0] - 1))
    return [Embedding(f"{prefix}{i:0{width}d}", row) for i, row in enumerate(mat)]


@pytest.fixture(scope="session")
def warm_kernels():
    """Force every compiled kernel through one tiny call so per-test
    timings exclude the one-time JIT cost. 64 nodes at m=2 makes a
    multi-level graph all but certain, compiling the upper-layer descent
    too."""
    from vecsearch import HnswIndex, HnswParams, SearchParams, dot

    mat = unit_vectors(64, 8, seed=0)
    embs = as_embeddings(mat)
    idx = HnswIndex.build(embs, HnswParams(m=2, ef_construction=4, seed=0))
    assert idx.max_level >= 1
    idx.search(Embedding("q", mat[0]), SearchParams(ef_search=4, k=2))
    dot(embs[0], embs[1])
    return True
