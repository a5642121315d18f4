import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dartboard import EmbeddingMatrix, cosine_similarity, pairwise_similarity, similarity_row
from dartboard.vectors import VectorError, as_query_vector

from conftest import random_corpus


def oracle_cosine(a, b):
    # scalar brute force, independent of numpy
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    return dot / (na * nb)


class TestCosineSimilarity:
    def test_identical(self):
        assert cosine_similarity((1, 0), (1, 0)) == 1.0

    def test_orthogonal(self):
        assert cosine_similarity((1, 0), (0, 1)) == 0.0

    def test_hand_computed(self):
        got = cosine_similarity((2, 1), (1, 2))
        assert got == pytest.approx(0.8, abs=1e-15)
        assert got == pytest.approx(oracle_cosine((2, 1), (1, 2)), abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(VectorError):
            cosine_similarity((1, 0), (1, 0, 0))

    def test_zero_norm(self):
        with pytest.raises(VectorError):
            cosine_similarity((0, 0), (1, 0))

    def test_clamped_to_range(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            a = rng.normal(size=8)
            assert -1.0 <= cosine_similarity(a, a * 3.0) <= 1.0


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=16),
       st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=16))
def test_cosine_symmetry(a, b):
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    if math.sqrt(sum(x * x for x in a)) == 0 or math.sqrt(sum(x * x for x in b)) == 0:
        return
    assert cosine_similarity(a, b) == cosine_similarity(b, a)


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=3),
       st.lists(st.floats(-100, 100), min_size=3, max_size=3),
       st.floats(1e-3, 1e3))
def test_cosine_scale_invariance(a, b, c):
    # norms small enough that squares underflow are out of scope
    if math.sqrt(sum(x * x for x in a)) < 1e-6 or math.sqrt(sum(x * x for x in b)) < 1e-6:
        return
    scaled = [c * x for x in a]
    assert cosine_similarity(scaled, b) == pytest.approx(cosine_similarity(a, b), abs=1e-12)


class TestSimilarityRow:
    def test_basic(self):
        m = EmbeddingMatrix(ids=("a", "b"), data=[[1, 0], [0, 1]])
        assert similarity_row([1, 0], m).tolist() == [1.0, 0.0]

    def test_hand_computed(self):
        m = EmbeddingMatrix(ids=("a", "b", "c"), data=[[2, 1], [1, 2], [0, 1]])
        got = similarity_row([2, 1], m)
        expected = [oracle_cosine((2, 1), row) for row in [(2, 1), (1, 2), (0, 1)]]
        np.testing.assert_allclose(got, expected, atol=1e-15)
        assert got[2] == pytest.approx(0.4472135954999579, abs=1e-12)

    def test_empty_matrix(self):
        m = EmbeddingMatrix(ids=(), data=np.empty((0, 3)))
        assert similarity_row([1, 0, 0], m).shape == (0,)

    def test_dimension_mismatch(self):
        m = EmbeddingMatrix(ids=("a",), data=[[1, 0]])
        with pytest.raises(VectorError):
            similarity_row([1, 0, 0], m)

    def test_zero_norm_row_names_id(self):
        m = EmbeddingMatrix(ids=("ok", "bad"), data=[[1, 0], [0, 0]])
        with pytest.raises(VectorError, match="bad"):
            similarity_row([1, 0], m)


class TestPairwiseSimilarity:
    def test_orthogonal_pair(self):
        m = EmbeddingMatrix(ids=("a", "b"), data=[[1, 0], [0, 1]])
        np.testing.assert_array_equal(pairwise_similarity(m), np.eye(2))

    def test_duplicate_rows(self):
        m = EmbeddingMatrix(ids=("a", "b"), data=[[2, 1], [2, 1]])
        sims = pairwise_similarity(m)
        np.testing.assert_allclose(sims, np.ones((2, 2)), atol=1e-15)
        assert np.array_equal(sims, sims.T)

    def test_matches_scalar_oracle(self):
        rows = [(2, 1), (1, 2), (0, 1)]
        m = EmbeddingMatrix(ids=("a", "b", "c"), data=rows)
        got = pairwise_similarity(m)
        for i in range(3):
            for j in range(3):
                assert got[i, j] == pytest.approx(oracle_cosine(rows[i], rows[j]), abs=1e-12)

    def test_exactly_symmetric_random(self):
        m = random_corpus(3, 40, 16)
        sims = pairwise_similarity(m)
        assert np.array_equal(sims, sims.T)
        np.testing.assert_array_equal(np.diag(sims), np.ones(40))

    def test_consistent_with_cosine_similarity(self):
        m = random_corpus(11, 12, 5)
        sims = pairwise_similarity(m)
        for i in range(m.rows):
            for j in range(m.rows):
                expected = cosine_similarity(m.data[i], m.data[j])
                assert sims[i, j] == pytest.approx(expected, abs=1e-12)

    def test_zero_norm_row_names_id(self):
        m = EmbeddingMatrix(ids=("x", "dead"), data=[[1, 0], [0, 0]])
        with pytest.raises(VectorError, match="dead"):
            pairwise_similarity(m)

    def test_empty_matrix_rejected(self):
        m = EmbeddingMatrix(ids=(), data=np.empty((0, 2)))
        with pytest.raises(VectorError):
            pairwise_similarity(m)


class TestEmbeddingMatrix:
    def test_validates_finiteness(self):
        with pytest.raises(VectorError, match="non-finite"):
            EmbeddingMatrix(ids=("a",), data=[[np.nan, 1.0]])

    def test_validates_id_count(self):
        with pytest.raises(VectorError):
            EmbeddingMatrix(ids=("a", "b"), data=[[1.0, 2.0]])

    def test_validates_unique_ids(self):
        with pytest.raises(VectorError, match="duplicate"):
            EmbeddingMatrix(ids=("a", "a"), data=[[1.0], [2.0]])

    def test_rejects_zero_dims(self):
        with pytest.raises(VectorError):
            EmbeddingMatrix(ids=(), data=np.empty((0, 0)))

    def test_data_is_read_only(self):
        m = EmbeddingMatrix(ids=("a",), data=[[1.0, 2.0]])
        with pytest.raises(ValueError):
            m.data[0, 0] = 5.0

    def test_subset_preserves_order(self):
        m = random_corpus(0, 6, 3)
        sub = m.subset([4, 1])
        assert sub.ids == (m.ids[4], m.ids[1])
        np.testing.assert_array_equal(sub.data[0], m.data[4])

    def test_row_lookup(self):
        m = EmbeddingMatrix(ids=("a", "b"), data=[[1, 0], [0, 1]])
        np.testing.assert_array_equal(m.row("b"), [0.0, 1.0])
        with pytest.raises(KeyError):
            m.row("nope")


class TestQueryVector:
    def test_zero_norm_rejected(self):
        with pytest.raises(VectorError, match="zero norm"):
            as_query_vector([0.0, 0.0])

    def test_nan_rejected(self):
        with pytest.raises(VectorError):
            as_query_vector([np.nan, 1.0])

    def test_wrong_dims_rejected(self):
        with pytest.raises(VectorError):
            as_query_vector([1.0, 0.0], dims=3)
