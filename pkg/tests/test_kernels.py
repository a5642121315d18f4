import numpy as np
import pytest

from dartboard import (
    EmbeddingMatrix,
    KernelConfig,
    ScoreMatrix,
    Transform,
    guess_log_prob_matrix,
    log_norm,
    query_log_probs,
    similarity_to_distance,
    symmetrize_pair_scores,
)
from dartboard.kernels import LOG_FLOOR, KernelError

# Frozen from a 50-digit evaluation of the closed forms.
LOG_NORM_0_1 = -0.9189385332046728
LOG_NORM_1_HALF = -2.2257913526447273


class TestLogNorm:
    def test_standard_at_zero(self):
        assert log_norm(0.0, 1.0) == pytest.approx(LOG_NORM_0_1, abs=1e-15)

    def test_closed_form_value(self):
        assert log_norm(1.0, 0.5) == pytest.approx(LOG_NORM_1_HALF, abs=1e-12)

    def test_difference_cancels_constants(self):
        for sigma in (0.096, 0.5, 1.0, 3.0):
            for mu in (0.0, 0.2, 1.0, 1.7):
                diff = log_norm(0.0, sigma) - log_norm(mu, sigma)
                assert diff == pytest.approx(mu * mu / (2 * sigma * sigma), abs=1e-12)

    def test_difference_between_two_mus(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            sigma = rng.uniform(0.05, 3.0)
            mu1, mu2 = rng.uniform(0, 2, size=2)
            got = log_norm(mu1, sigma) - log_norm(mu2, sigma)
            want = (mu2 * mu2 - mu1 * mu1) / (2 * sigma * sigma)
            assert got == pytest.approx(want, abs=1e-12)

    def test_strictly_decreasing_in_abs_mu(self):
        mus = np.linspace(0, 3, 31)
        vals = log_norm(mus, 0.7)
        assert np.all(np.diff(vals) < 0)
        np.testing.assert_allclose(log_norm(-mus, 0.7), vals)

    def test_sigma_must_be_positive(self):
        with pytest.raises(KernelError):
            log_norm(0.0, 0.0)
        with pytest.raises(KernelError):
            log_norm(0.0, -1.0)

    def test_underflow_floored(self):
        v = log_norm(1e200, 1.0)
        assert v == LOG_FLOOR
        assert np.isfinite(v)

    def test_vectorized(self):
        out = log_norm(np.array([0.0, 1.0]), 0.5)
        assert out.shape == (2,)
        assert out[1] == pytest.approx(LOG_NORM_1_HALF, abs=1e-12)


class TestTransforms:
    def test_one_minus(self):
        assert similarity_to_distance(1.0, Transform("one_minus")) == 0.0
        assert similarity_to_distance(0.8, Transform("one_minus")) == pytest.approx(0.2)

    def test_negate(self):
        assert similarity_to_distance(3.7, Transform("negate")) == -3.7

    def test_affine(self):
        t = Transform("affine", a=2.0, b=-1.0)
        assert similarity_to_distance(0.5, t) == 0.0

    def test_unknown_rejected(self):
        with pytest.raises(KernelError):
            Transform("square")

    def test_parse(self):
        t = Transform.parse("affine:2.0,-1.0")
        assert (t.kind, t.a, t.b) == ("affine", 2.0, -1.0)
        assert Transform.parse("negate").kind == "negate"
        with pytest.raises(KernelError):
            Transform.parse("affine:1.0")


@pytest.fixture
def three_candidates():
    return EmbeddingMatrix(ids=("p0", "p1", "p2"), data=[[2, 1], [1, 2], [0, 1]])


class TestQueryLogProbs:
    def test_hand_computed_triple(self, three_candidates):
        got = query_log_probs([2, 1], three_candidates, KernelConfig(sigma=1.0))
        np.testing.assert_allclose(
            got,
            [-0.9189385332046728, -0.9389385332046727, -1.0717249377047149],
            atol=1e-12,
        )

    def test_query_in_candidates_is_max(self, three_candidates):
        got = query_log_probs([2, 1], three_candidates, KernelConfig(sigma=0.3))
        assert np.argmax(got) == 0
        assert got[0] == pytest.approx(log_norm(0.0, 0.3), abs=1e-12)

    def test_equidistant_candidates_equal(self):
        m = EmbeddingMatrix(ids=("a", "b"), data=[[1, 1, 0], [1, 0, 1]])
        got = query_log_probs([1, 0, 0], m, KernelConfig(sigma=0.4))
        assert got[0] == got[1]

    def test_argmax_matches_knn_for_all_sigma(self):
        rng = np.random.default_rng(12)
        data = rng.normal(size=(20, 6))
        m = EmbeddingMatrix(ids=tuple(f"c{i}" for i in range(20)), data=data)
        q = rng.normal(size=6)
        sims = m.data @ q / (np.linalg.norm(m.data, axis=1) * np.linalg.norm(q))
        for sigma in (1e-3, 0.096, 0.5, 1.0, 10.0):
            got = query_log_probs(q, m, KernelConfig(sigma=sigma))
            assert np.argmax(got) == np.argmax(sims)

    def test_external_source_uses_score_row(self):
        scores = ScoreMatrix(query_ids=("q1",), passage_ids=("p0", "p1"),
                             values=[[2.0, -1.0]])
        m = EmbeddingMatrix(ids=("p0", "p1"), data=[[1, 0], [0, 1]])
        cfg = KernelConfig(sigma=1.0, query_source="external_scores", scores=scores)
        got = query_log_probs(None, m, cfg, query_id="q1")
        np.testing.assert_allclose(got, log_norm(np.array([-2.0, 1.0]), 1.0), atol=1e-12)

    def test_missing_score_row_names_query(self):
        scores = ScoreMatrix(query_ids=("q1",), passage_ids=("p0",), values=[[1.0]])
        m = EmbeddingMatrix(ids=("p0",), data=[[1, 0]])
        cfg = KernelConfig(sigma=1.0, query_source="external_scores", scores=scores)
        with pytest.raises(KernelError, match="q9"):
            query_log_probs(None, m, cfg, query_id="q9")

    def test_external_without_scores_rejected(self):
        m = EmbeddingMatrix(ids=("p0",), data=[[1, 0]])
        cfg = KernelConfig(sigma=1.0, query_source="external_scores")
        with pytest.raises(KernelError, match="score matrix"):
            query_log_probs(None, m, cfg, query_id="q1")


class TestGuessLogProbMatrix:
    def test_diagonal_is_row_max(self, three_candidates):
        D = guess_log_prob_matrix(three_candidates, KernelConfig(sigma=0.5))
        for i in range(3):
            assert D[i, i] == D[i].max()
            assert D[i, i] == pytest.approx(log_norm(0.0, 0.5), abs=1e-12)

    def test_duplicate_rows_give_identical_rows(self, duplicate_corpus):
        D = guess_log_prob_matrix(duplicate_corpus, KernelConfig(sigma=0.5))
        np.testing.assert_array_equal(D[0], D[1])

    def test_exactly_symmetric(self):
        rng = np.random.default_rng(3)
        m = EmbeddingMatrix(ids=tuple(f"c{i}" for i in range(25)),
                            data=rng.normal(size=(25, 8)))
        D = guess_log_prob_matrix(m, KernelConfig(sigma=0.7))
        assert np.array_equal(D, D.T)

    def test_matches_scalar_recomputation(self, three_candidates):
        D = guess_log_prob_matrix(three_candidates, KernelConfig(sigma=1.0))
        rows = three_candidates.data
        for i in range(3):
            for j in range(3):
                dot = float(rows[i] @ rows[j])
                sim = dot / (np.linalg.norm(rows[i]) * np.linalg.norm(rows[j]))
                want = log_norm(1.0 - min(sim, 1.0), 1.0)
                assert D[i, j] == pytest.approx(want, abs=1e-12)

    def test_external_pair_scores_symmetrized(self):
        scores = ScoreMatrix(
            query_ids=("q1",), passage_ids=("p0", "p1"),
            values=[[0.0, 0.0]],
            pair_values=[[5.0, 0.0], [2.0, 5.0]],
        )
        m = EmbeddingMatrix(ids=("p0", "p1"), data=[[1, 0], [0, 1]])
        cfg = KernelConfig(sigma=1.0, guess_source="external_scores", scores=scores)
        D = guess_log_prob_matrix(m, cfg)
        assert D[0, 1] == D[1, 0]
        assert D[0, 1] == pytest.approx(log_norm(-1.0, 1.0), abs=1e-12)

    def test_missing_pair_block_rejected(self):
        scores = ScoreMatrix(query_ids=("q1",), passage_ids=("p0",), values=[[1.0]])
        m = EmbeddingMatrix(ids=("p0",), data=[[1, 0]])
        cfg = KernelConfig(sigma=1.0, guess_source="external_scores", scores=scores)
        with pytest.raises(KernelError, match="pair"):
            guess_log_prob_matrix(m, cfg)


class TestSymmetrizePairScores:
    def test_arithmetic_mean(self):
        got = symmetrize_pair_scores([[0, 2], [4, 0]])
        np.testing.assert_array_equal(got, [[0, 3], [3, 0]])

    def test_idempotent_on_symmetric(self):
        sym = np.array([[1.0, 2.0], [2.0, 5.0]])
        np.testing.assert_array_equal(symmetrize_pair_scores(sym), sym)

    def test_result_equals_own_transpose(self):
        rng = np.random.default_rng(8)
        raw = rng.normal(size=(4, 4))
        got = symmetrize_pair_scores(raw)
        assert np.array_equal(got, got.T)

    def test_non_square_rejected(self):
        with pytest.raises(KernelError):
            symmetrize_pair_scores(np.zeros((2, 3)))


class TestKernelConfig:
    def test_sigma_positive(self):
        with pytest.raises(KernelError):
            KernelConfig(sigma=0.0)

    def test_variants(self):
        cs = KernelConfig.variant("cossim", sigma=1.0)
        assert (cs.query_source, cs.guess_source) == ("cosine", "cosine")
        cc = KernelConfig.variant("crosscoder", sigma=1.0)
        assert (cc.query_source, cc.guess_source) == ("external_scores", "external_scores")
        hy = KernelConfig.variant("hybrid", sigma=1.0)
        assert (hy.query_source, hy.guess_source) == ("external_scores", "cosine")
        with pytest.raises(KernelError):
            KernelConfig.variant("bogus", sigma=1.0)

    def test_default_transforms_per_source(self):
        cfg = KernelConfig.variant("hybrid", sigma=1.0)
        assert cfg.resolved_query_transform().kind == "negate"
        assert cfg.resolved_guess_transform().kind == "one_minus"


class TestScoreMatrix:
    def test_shape_validation(self):
        with pytest.raises(KernelError):
            ScoreMatrix(query_ids=("q1",), passage_ids=("p0", "p1"), values=[[1.0]])

    def test_finite_validation(self):
        with pytest.raises(KernelError):
            ScoreMatrix(query_ids=("q1",), passage_ids=("p0",), values=[[np.inf]])

    def test_pair_block_as_given(self):
        sm = ScoreMatrix(query_ids=("q1",), passage_ids=("p0", "p1"),
                         values=[[0.0, 1.0]], pair_values=[[0.0, 9.0], [1.0, 0.0]])
        np.testing.assert_array_equal(sm.pair_block(("p0", "p1")),
                                      [[0.0, 9.0], [1.0, 0.0]])

    def test_missing_passage_named(self):
        sm = ScoreMatrix(query_ids=("q1",), passage_ids=("p0",), values=[[0.0]])
        with pytest.raises(KernelError, match="p7"):
            sm.query_row("q1", ("p7",))
