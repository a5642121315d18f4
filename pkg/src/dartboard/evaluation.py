"""Metrics, label-driven baselines, and parameter-sweep orchestration.

Two labeling shapes are supported. Simple cases carry flat positive and
negative id lists; integration cases split positives into one list per
question component, with negatives shared. NDCG gains differ accordingly:
simple cases credit retrieved positives, integration cases credit the first
retrieved positive of each component.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import KernelConfig, ScoreMatrix
from .retrieval import (
    RetrievalRequest,
    RetrievalResult,
    dartboard_greedy,
    knn,
    mmr,
)
from .vectors import EmbeddingMatrix, cosine_similarity

logger = logging.getLogger("dartboard")

BASELINE_METHODS = ("oracle", "random", "empty")
SWEEP_COLUMNS = ("method", "param_name", "param_value", "ndcg", "diversity",
                 "n_queries", "k", "K", "seed")


class EvalError(ValueError):
    """Raised for unusable cases, labels, or sweep configuration."""


@dataclass(frozen=True)
class QueryCase:
    """One labeled query: flat positives (simple) or per-component positives
    plus shared negatives (integration). Answer strings are carried through
    untouched."""

    case_id: str
    query: str
    positive: tuple
    negative: tuple = ()
    answers: tuple = ()

    def __post_init__(self):
        positive = tuple(tuple(p) if isinstance(p, (list, tuple)) else p
                         for p in self.positive)
        object.__setattr__(self, "positive", positive)
        object.__setattr__(self, "negative", tuple(self.negative))
        object.__setattr__(self, "answers", tuple(self.answers))
        if not positive:
            raise EvalError(f"case {self.case_id!r} has no positive labels")
        if self.is_integration:
            if not all(isinstance(p, tuple) for p in positive):
                raise EvalError(
                    f"case {self.case_id!r} mixes flat and per-component positives"
                )
            if any(len(comp) == 0 for comp in positive):
                raise EvalError(f"case {self.case_id!r} has an empty component")

    @property
    def is_integration(self) -> bool:
        return any(isinstance(p, tuple) for p in self.positive)

    @property
    def components(self) -> tuple:
        return self.positive if self.is_integration else (self.positive,)

    def flat_positives(self) -> tuple:
        seen, out = set(), []
        for comp in self.components:
            for pid in comp:
                if pid not in seen:
                    seen.add(pid)
                    out.append(pid)
        return tuple(out)

    def check_against(self, corpus: EmbeddingMatrix) -> None:
        known = set(corpus.ids)
        missing = [pid for pid in (*self.flat_positives(), *self.negative)
                   if pid not in known]
        if missing:
            raise EvalError(
                f"case {self.case_id!r} references unknown passage ids: {missing}"
            )


def ndcg_at_k(result: RetrievalResult, case: QueryCase, k: int,
              first_hit_only: bool = False) -> float:
    """Normalized discounted cumulative gain of the top-k retrieved ids.

    Simple cases: every retrieved positive gains 1 (with first_hit_only,
    only the first). Integration cases: a rank gains 1 when it is the first
    retrieved positive of a not-yet-credited component. The normalizer packs
    the case's gain budget into the top ranks, so the result is in [0, 1].
    """
    ids = result.ids[:k]
    if case.is_integration:
        gains = []
        credited = [False] * len(case.components)
        for pid in ids:
            hit = False
            for ci, comp in enumerate(case.components):
                if not credited[ci] and pid in comp:
                    credited[ci] = True
                    hit = True
            gains.append(1.0 if hit else 0.0)
        budget = min(len(case.components), k)
    else:
        positives = set(case.positive)
        gains = []
        found = False
        for pid in ids:
            if pid in positives and not (first_hit_only and found):
                gains.append(1.0)
                found = True
            else:
                gains.append(0.0)
        budget = min(1 if first_hit_only else len(positives), k)
    dcg = sum(g / math.log2(i + 2) for i, g in enumerate(gains))
    ideal = sum(1.0 / math.log2(i + 2) for i in range(budget))
    return dcg / ideal


def diversity(result_ids, corpus: EmbeddingMatrix) -> float:
    """One minus the mean cosine similarity over all unordered result pairs."""
    ids = list(result_ids)
    if len(ids) < 2:
        raise EvalError("diversity needs at least 2 results")
    vecs = [corpus.row(pid) for pid in ids]
    sims = [cosine_similarity(vecs[i], vecs[j])
            for i in range(len(vecs)) for j in range(i + 1, len(vecs))]
    return 1.0 - float(np.mean(sims))


def oracle_baseline(case: QueryCase, k: int) -> RetrievalResult:
    """Label-perfect retrieval: positives first, negatives as filler.

    Simple cases take positives in ascending id order. Integration cases
    round-robin one positive per component before taking seconds, so every
    component is covered as early as possible.
    """
    picked: list = []
    if case.is_integration:
        queues = [sorted(comp) for comp in case.components]
        depth = 0
        while len(picked) < k and any(depth < len(q) for q in queues):
            for q in queues:
                if depth < len(q) and len(picked) < k and q[depth] not in picked:
                    picked.append(q[depth])
            depth += 1
    else:
        picked.extend(sorted(case.positive)[:k])
    for pid in sorted(case.negative):
        if len(picked) >= k:
            break
        if pid not in picked:
            picked.append(pid)
    if len(picked) < k:
        logger.warning("case %s: only %d labeled passages for k=%d",
                       case.case_id, len(picked), k)
    return RetrievalResult(
        ids=tuple(picked),
        objectives=tuple(0.0 for _ in picked),
        method="oracle",
        params={"k": k},
    )


def random_baseline(corpus_ids, k: int, rng: np.random.Generator) -> RetrievalResult:
    """Uniform sample of k ids without replacement, reproducible per generator."""
    ids = list(corpus_ids)
    if k > len(ids):
        logger.warning("k=%d clamped to corpus size %d", k, len(ids))
        k = len(ids)
    picked = rng.choice(len(ids), size=k, replace=False)
    return RetrievalResult(
        ids=tuple(ids[i] for i in picked),
        objectives=tuple(0.0 for _ in range(k)),
        method="random",
        params={"k": k},
    )


@dataclass(frozen=True)
class SweepPlan:
    """One method to evaluate, optionally across a parameter grid.

    method: knn | mmr | dartboard | oracle | random | empty.
    param_name is "sigma" (dartboard) or "lambda" (mmr); baselines and knn
    take no grid. kernel_variant picks cossim / crosscoder / hybrid.
    """

    method: str
    param_name: str | None = None
    param_values: tuple = ()
    kernel_variant: str = "cossim"
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "param_values", tuple(self.param_values))
        if self.param_name is not None and not self.param_values:
            raise EvalError(f"empty parameter grid for {self.method}")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.method in ("knn", "mmr", "dartboard") and self.kernel_variant != "cossim":
            return f"{self.method}-{self.kernel_variant}"
        return self.method

    def grid(self):
        if self.param_name is None:
            return [(None, None)]
        return [(self.param_name, v) for v in self.param_values]


@dataclass(frozen=True)
class SweepRow:
    method: str
    param_name: str | None
    param_value: float | None
    ndcg: float
    diversity: float | None
    n_queries: int
    k: int
    triage_k: int
    seed: int


@dataclass(frozen=True)
class SweepReport:
    rows: tuple[SweepRow, ...]

    def best_rows(self) -> tuple[SweepRow, ...]:
        """Highest-NDCG row per method; earlier grid point wins ties."""
        best: dict[str, SweepRow] = {}
        for row in self.rows:
            cur = best.get(row.method)
            if cur is None or row.ndcg > cur.ndcg:
                best[row.method] = row
        return tuple(best.values())

    def to_csv(self, fileobj=None) -> str:
        """Fixed column order: method,param_name,param_value,ndcg,diversity,
        n_queries,k,K,seed."""
        buf = fileobj if fileobj is not None else io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for r in self.rows:
            writer.writerow([
                r.method,
                r.param_name if r.param_name is not None else "",
                _fmt(r.param_value),
                _fmt(r.ndcg),
                _fmt(r.diversity),
                r.n_queries,
                r.k,
                r.triage_k,
                r.seed,
            ])
        return "" if fileobj is not None else buf.getvalue()


def _fmt(value) -> str:
    if value is None:
        return ""
    return f"{value:.6f}"


def evaluate_method(cases, corpus: EmbeddingMatrix, queries: EmbeddingMatrix | None,
                    method: str, *, k: int = 5, triage_k: int = 100, seed: int = 0,
                    sigma: float | None = None, mmr_lambda: float | None = None,
                    kernel_variant: str = "cossim", scores: ScoreMatrix | None = None,
                    first_hit_only: bool = False) -> tuple[float, float | None]:
    """Mean NDCG@k and mean diversity of one method over all cases.

    Any per-query failure aborts with the failing query id attached.
    """
    ndcgs: list[float] = []
    divs: list[float] = []
    for idx, case in enumerate(cases):
        try:
            result = _run_case(case, corpus, queries, method, k=k, triage_k=triage_k,
                               seed=seed, case_index=idx, sigma=sigma,
                               mmr_lambda=mmr_lambda, kernel_variant=kernel_variant,
                               scores=scores)
            if result is None:  # empty baseline retrieves nothing
                ndcgs.append(0.0)
                continue
            ndcgs.append(ndcg_at_k(result, case, k, first_hit_only=first_hit_only))
            if len(result.ids) >= 2:
                divs.append(diversity(result.ids, corpus))
        except Exception as exc:
            raise EvalError(f"query {case.case_id!r} failed: {exc}") from exc
    mean_div = float(np.mean(divs)) if divs else None
    return float(np.mean(ndcgs)), mean_div


def _run_case(case, corpus, queries, method, *, k, triage_k, seed, case_index,
              sigma, mmr_lambda, kernel_variant, scores):
    if method == "empty":
        return None
    if method == "oracle":
        case.check_against(corpus)
        return oracle_baseline(case, k)
    if method == "random":
        rng = np.random.default_rng([seed, case_index])
        return random_baseline(corpus.ids, k, rng)
    if queries is None:
        raise EvalError(f"method {method!r} needs query embeddings")
    case.check_against(corpus)
    qvec = queries.row(case.case_id)
    if method == "knn":
        kernel = None
        if kernel_variant != "cossim":
            kernel = KernelConfig.variant(kernel_variant, sigma=1.0, scores=scores)
        req = RetrievalRequest(query_vec=qvec, query_id=case.case_id, k=k,
                               triage_k=triage_k, method="knn", kernel=kernel)
        return knn(corpus, req)
    if method == "mmr":
        if mmr_lambda is None:
            raise EvalError("mmr needs a lambda value")
        kernel = None
        if kernel_variant != "cossim":
            kernel = KernelConfig.variant(kernel_variant, sigma=1.0, scores=scores)
        req = RetrievalRequest(query_vec=qvec, query_id=case.case_id, k=k,
                               triage_k=triage_k, method="mmr", kernel=kernel,
                               mmr_diversity=mmr_lambda)
        return mmr(corpus, req)
    if method == "dartboard":
        if sigma is None:
            raise EvalError("dartboard needs a sigma value")
        kernel = KernelConfig.variant(kernel_variant, sigma=sigma, scores=scores)
        req = RetrievalRequest(query_vec=qvec, query_id=case.case_id, k=k,
                               triage_k=triage_k, method="dartboard", kernel=kernel)
        return dartboard_greedy(corpus, req)
    raise EvalError(f"unknown method {method!r}")


def run_sweep(cases, corpus: EmbeddingMatrix, queries: EmbeddingMatrix | None,
              plans, *, k: int = 5, triage_k: int = 100, seed: int = 0,
              scores: ScoreMatrix | None = None, sigma: float = 0.096,
              mmr_lambda: float = 0.5, first_hit_only: bool = False) -> SweepReport:
    """Evaluate every plan at every grid point; one report row per point.

    Fixed (non-grid) parameters fall back to `sigma` / `mmr_lambda`.
    Deterministic for a given seed and inputs.
    """
    cases = list(cases)
    if not cases:
        raise EvalError("no cases to evaluate")
    rows: list[SweepRow] = []
    for plan in plans:
        for param_name, value in plan.grid():
            eff_sigma = value if param_name == "sigma" else sigma
            eff_lambda = value if param_name == "lambda" else mmr_lambda
            ndcg, div = evaluate_method(
                cases, corpus, queries, plan.method, k=k, triage_k=triage_k,
                seed=seed, sigma=eff_sigma, mmr_lambda=eff_lambda,
                kernel_variant=plan.kernel_variant, scores=scores,
                first_hit_only=first_hit_only)
            rows.append(SweepRow(
                method=plan.name,
                param_name=param_name,
                param_value=None if value is None else float(value),
                ndcg=ndcg,
                diversity=div,
                n_queries=len(cases),
                k=k,
                triage_k=triage_k,
                seed=seed,
            ))
    return SweepReport(rows=tuple(rows))
