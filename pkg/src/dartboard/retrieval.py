"""Selection algorithms: KNN, marginal-relevance reranking, and the greedy
relevant-information-gain reranker with its exact brute-force counterpart.

All methods share the same front door: triage the corpus to the top-K
candidates by cosine similarity, then select k of them. Runs are fully
deterministic; argmax ties resolve by ascending post-triage index, which is
itself descending similarity then ascending id.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ._accel import greedy_core, mmr_core
from .kernels import (
    COSINE,
    KernelConfig,
    guess_log_prob_matrix,
    query_log_probs,
    symmetrize_pair_scores,
)
from .vectors import EmbeddingMatrix, PassageId, pairwise_similarity, similarity_row

logger = logging.getLogger("dartboard")

# Ceiling on C(n, k) for the exhaustive search.
EXACT_GUARD = 10**6

METHODS = ("knn", "mmr", "dartboard")


class RetrievalError(ValueError):
    """Raised for invalid retrieval requests."""


@dataclass(frozen=True)
class RetrievalRequest:
    """One retrieval call: query, result size k, triage size, method knobs.

    query_vec drives cosine similarity and triage; query_id additionally
    resolves external score rows. mmr_diversity is the lambda in [0, 1]
    trading relevance against similarity to already-selected items.
    """

    query_vec: np.ndarray | None = None
    query_id: PassageId | None = None
    k: int = 5
    triage_k: int = 100
    method: str = "dartboard"
    kernel: KernelConfig | None = None
    mmr_diversity: float | None = None

    def __post_init__(self):
        if self.k < 1:
            raise RetrievalError(f"k must be >= 1, got {self.k}")
        if self.triage_k < 1:
            raise RetrievalError(f"triage_k must be >= 1, got {self.triage_k}")
        if self.method not in METHODS:
            raise RetrievalError(f"unknown method {self.method!r} (want one of {METHODS})")
        if self.mmr_diversity is not None and not 0.0 <= self.mmr_diversity <= 1.0:
            raise RetrievalError(f"mmr_diversity must be in [0, 1], got {self.mmr_diversity}")
        if self.query_vec is not None:
            object.__setattr__(self, "query_vec", np.asarray(self.query_vec, dtype=np.float64))


@dataclass(frozen=True)
class RetrievalResult:
    """Ordered passage ids with the objective value recorded at each step."""

    ids: tuple[PassageId, ...]
    objectives: tuple[float, ...]
    method: str
    params: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.ids)


def triage_pool(corpus: EmbeddingMatrix, query_vec, triage_k: int) -> EmbeddingMatrix:
    """Top-K candidates by cosine similarity, descending, ties by ascending id."""
    order = _triage_order(corpus, query_vec)
    return corpus.subset(order[: min(triage_k, corpus.rows)])


def _triage_order(corpus: EmbeddingMatrix, query_vec) -> list[int]:
    if corpus.rows == 0:
        raise RetrievalError("cannot retrieve from an empty corpus")
    if query_vec is None:
        raise RetrievalError("triage needs a query vector")
    sims = similarity_row(query_vec, corpus)
    return sorted(range(corpus.rows), key=lambda i: (-sims[i], corpus.ids[i]))


def _clamp(request: RetrievalRequest, corpus_rows: int) -> tuple[int, int]:
    """Clamp triage size and k down to what the corpus can supply, warning
    instead of erroring so sweep pipelines keep running."""
    eff_K = request.triage_k
    if eff_K > corpus_rows:
        logger.warning("triage_k=%d clamped to corpus size %d", eff_K, corpus_rows)
        eff_K = corpus_rows
    eff_k = request.k
    if eff_k > eff_K:
        logger.warning("k=%d clamped to candidate pool size %d", eff_k, eff_K)
        eff_k = eff_K
    return eff_K, eff_k


def log_sum_exp(values) -> float:
    """max(v) + ln(sum(exp(v - max))); safe against overflow for finite input."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise RetrievalError("log_sum_exp of an empty vector")
    m = v.max()
    return float(m + np.log(np.exp(v - m).sum()))


def knn(corpus: EmbeddingMatrix, request: RetrievalRequest) -> RetrievalResult:
    """Top-k by descending similarity: cosine, or external query scores
    (re-ranking the cosine-triaged pool) when the query kernel is external."""
    eff_K, eff_k = _clamp(request, corpus.rows)
    order = _triage_order(corpus, request.query_vec)[:eff_K]
    pool = corpus.subset(order)
    cfg = request.kernel
    if cfg is not None and cfg.query_source != COSINE:
        scores = cfg._require_scores().query_row(_need_qid(request), pool.ids)
        rerank = sorted(range(pool.rows), key=lambda i: (-scores[i], pool.ids[i]))
        picked = rerank[:eff_k]
        values = [float(scores[i]) for i in picked]
    else:
        sims = similarity_row(request.query_vec, pool)
        picked = list(range(eff_k))
        values = [float(sims[i]) for i in picked]
    return RetrievalResult(
        ids=tuple(pool.ids[i] for i in picked),
        objectives=tuple(values),
        method="knn",
        params={"k": eff_k, "triage_k": eff_K},
    )


def mmr(corpus: EmbeddingMatrix, request: RetrievalRequest) -> RetrievalResult:
    """Greedy reranking by (1-lambda)*relevance - lambda*max-similarity-to-selected.

    The first pick is the most relevant candidate. Items are not reselected,
    but duplicated vectors in the corpus are distinct items, so exact
    duplicate vectors can and do appear in the output.
    """
    if request.mmr_diversity is None:
        raise RetrievalError("mmr needs mmr_diversity (lambda in [0, 1])")
    lam = float(request.mmr_diversity)
    eff_K, eff_k = _clamp(request, corpus.rows)
    pool = corpus.subset(_triage_order(corpus, request.query_vec)[:eff_K])
    cfg = request.kernel
    if cfg is not None and cfg.query_source != COSINE:
        rel = cfg._require_scores().query_row(_need_qid(request), pool.ids)
    else:
        rel = similarity_row(request.query_vec, pool)
    if cfg is not None and cfg.guess_source != COSINE:
        sims = symmetrize_pair_scores(cfg._require_scores().pair_block(pool.ids))
    else:
        sims = pairwise_similarity(pool)
    sel, scores = mmr_core(np.ascontiguousarray(rel), np.ascontiguousarray(sims), lam, eff_k)
    return RetrievalResult(
        ids=tuple(pool.ids[i] for i in sel),
        objectives=tuple(float(s) for s in scores),
        method="mmr",
        params={"k": eff_k, "triage_k": eff_K, "lambda": lam},
    )


def dartboard_greedy(corpus: EmbeddingMatrix, request: RetrievalRequest) -> RetrievalResult:
    """Greedy maximization of the log-space relevant-information-gain objective.

    Triage by cosine KNN, build the query log-kernel vector Q and guess
    log-kernel matrix D per the kernel config, seed with argmax(Q), then at
    each step fold every unselected candidate's D row into the running
    elementwise max and pick the candidate maximizing LogSumExp(max + Q).
    Already-selected candidates are excluded, so ids never repeat.
    """
    cfg = request.kernel
    if cfg is None:
        raise RetrievalError("dartboard needs a kernel config (sigma)")
    eff_K, eff_k = _clamp(request, corpus.rows)
    pool = corpus.subset(_triage_order(corpus, request.query_vec)[:eff_K])
    Q = query_log_probs(request.query_vec, pool, cfg, query_id=request.query_id)
    D = guess_log_prob_matrix(pool, cfg)
    sel, objs = greedy_core(np.ascontiguousarray(Q), np.ascontiguousarray(D), eff_k)
    return RetrievalResult(
        ids=tuple(pool.ids[i] for i in sel),
        objectives=tuple(float(o) for o in objs),
        method="dartboard",
        params={"k": eff_k, "triage_k": eff_K, "sigma": cfg.sigma,
                "query_source": cfg.query_source, "guess_source": cfg.guess_source},
    )


def dartboard_set_score(selected_ids, query_vec, pool: EmbeddingMatrix,
                        config: KernelConfig, query_id=None) -> float:
    """Objective of a fixed guess set over the candidate pool, from scratch.

    LogSumExp over pool members t of (max over guesses g of D[g][t]) + Q[t].
    Higher is better; adding a constant to Q or D shifts every set's score
    equally, so comparisons are unaffected.
    """
    ids = list(selected_ids)
    if not ids:
        raise RetrievalError("guess set must be nonempty")
    rows = [pool.index_of(g) for g in ids]
    Q = query_log_probs(query_vec, pool, config, query_id=query_id)
    D = guess_log_prob_matrix(pool, config)
    maxes = D[rows].max(axis=0)
    return log_sum_exp(maxes + Q)


def dartboard_exact(pool: EmbeddingMatrix, query_vec, k: int, config: KernelConfig,
                    query_id=None) -> RetrievalResult:
    """Exhaustive best k-subset by set score. Test oracle only: cost grows as
    C(n, k), guarded at 10^6 combinations; use dartboard_greedy in production.

    Ties in the set score resolve to the lexicographically smallest id tuple.
    Returned ids are in id-sorted order with prefix set scores as objectives.
    """
    if k < 1:
        raise RetrievalError(f"k must be >= 1, got {k}")
    n = pool.rows
    if n == 0:
        raise RetrievalError("cannot retrieve from an empty corpus")
    if k > n:
        logger.warning("k=%d clamped to pool size %d", k, n)
        k = n
    if math.comb(n, k) > EXACT_GUARD:
        raise RetrievalError(
            f"C({n}, {k}) exceeds the exhaustive-search guard ({EXACT_GUARD}); "
            "use dartboard_greedy instead"
        )
    Q = query_log_probs(query_vec, pool, config, query_id=query_id)
    D = guess_log_prob_matrix(pool, config)
    by_id = sorted(range(n), key=lambda i: pool.ids[i])
    best_combo = None
    best_score = -np.inf
    for combo in combinations(by_id, k):
        maxes = D[list(combo)].max(axis=0)
        score = log_sum_exp(maxes + Q)
        if score > best_score:
            best_score = score
            best_combo = combo
    prefix_scores = []
    for j in range(1, k + 1):
        maxes = D[list(best_combo[:j])].max(axis=0)
        prefix_scores.append(log_sum_exp(maxes + Q))
    return RetrievalResult(
        ids=tuple(pool.ids[i] for i in best_combo),
        objectives=tuple(prefix_scores),
        method="dartboard_exact",
        params={"k": k, "sigma": config.sigma},
    )


def retrieve(corpus: EmbeddingMatrix, request: RetrievalRequest) -> RetrievalResult:
    """Dispatch on request.method."""
    if request.method == "knn":
        return knn(corpus, request)
    if request.method == "mmr":
        return mmr(corpus, request)
    return dartboard_greedy(corpus, request)


def _need_qid(request: RetrievalRequest) -> PassageId:
    if request.query_id is None:
        raise RetrievalError("external score lookup needs a query id")
    return request.query_id
