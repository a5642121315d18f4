"""Diversity-aware passage retrieval.

Greedy reranking that maximizes relevant information gain over a candidate
pool, alongside KNN and marginal-relevance baselines, binary embedding and
score formats, and an NDCG/diversity evaluation harness.
"""

from ._accel import BACKEND
from .evaluation import (
    QueryCase,
    SweepPlan,
    SweepReport,
    diversity,
    evaluate_method,
    ndcg_at_k,
    oracle_baseline,
    random_baseline,
    run_sweep,
)
from .fileio import (
    load_corpus,
    load_dataset,
    load_passages,
    read_embeddings,
    read_scores,
    write_embeddings,
    write_scores,
)
from .kernels import (
    KernelConfig,
    ScoreMatrix,
    Transform,
    guess_log_prob_matrix,
    log_norm,
    query_log_probs,
    similarity_to_distance,
    symmetrize_pair_scores,
)
from .retrieval import (
    RetrievalRequest,
    RetrievalResult,
    dartboard_exact,
    dartboard_greedy,
    dartboard_set_score,
    knn,
    log_sum_exp,
    mmr,
    retrieve,
    triage_pool,
)
from .vectors import (
    EmbeddingMatrix,
    cosine_similarity,
    pairwise_similarity,
    similarity_row,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EmbeddingMatrix",
    "KernelConfig",
    "QueryCase",
    "RetrievalRequest",
    "RetrievalResult",
    "ScoreMatrix",
    "SweepPlan",
    "SweepReport",
    "Transform",
    "cosine_similarity",
    "dartboard_exact",
    "dartboard_greedy",
    "dartboard_set_score",
    "diversity",
    "evaluate_method",
    "guess_log_prob_matrix",
    "knn",
    "load_corpus",
    "load_dataset",
    "load_passages",
    "log_norm",
    "log_sum_exp",
    "mmr",
    "ndcg_at_k",
    "oracle_baseline",
    "pairwise_similarity",
    "query_log_probs",
    "random_baseline",
    "read_embeddings",
    "read_scores",
    "retrieve",
    "run_sweep",
    "similarity_row",
    "similarity_to_distance",
    "symmetrize_pair_scores",
    "triage_pool",
    "write_embeddings",
    "write_scores",
]
