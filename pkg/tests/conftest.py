import numpy as np
import pytest

from dartboard import EmbeddingMatrix


def unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    rows = rng.normal(size=(n, d))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def random_corpus(seed: int, n: int, d: int) -> EmbeddingMatrix:
    rng = np.random.default_rng(seed)
    return EmbeddingMatrix(
        ids=tuple(f"p{i:04d}" for i in range(n)),
        data=unit_rows(rng, n, d),
    )


@pytest.fixture
def duplicate_corpus() -> EmbeddingMatrix:
    """Four passages with one exact duplicate vector pair."""
    return EmbeddingMatrix(
        ids=("p0", "p1", "p2", "p3"),
        data=np.array([[2.0, 1.0], [2.0, 1.0], [1.0, 2.0], [0.0, 1.0]]),
    )
