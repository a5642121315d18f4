"""Command-line surface: retrieve, evaluate, sweep, convert.

Outputs are JSON for single retrievals and CSV for evaluation/sweeps.
Verbosity is controlled by the DARTBOARD_LOG env var (DEBUG/INFO/WARNING).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import fileio
from .evaluation import SweepPlan, run_sweep
from .kernels import KernelConfig, Transform
from .retrieval import RetrievalRequest, retrieve

logger = logging.getLogger("dartboard")

DEFAULT_K = 5
DEFAULT_TRIAGE = 100
DEFAULT_SIGMA = 0.096
DEFAULT_LAMBDA = 0.5


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dartboard",
        description="Diversity-aware passage retrieval and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ret = sub.add_parser("retrieve", help="rank passages for one query")
    _add_corpus_args(p_ret)
    _add_method_args(p_ret)
    p_ret.add_argument("--query-vec", help="inline JSON array for the query embedding")
    p_ret.add_argument("--query-id", help="query id resolved in --query-embeddings")
    p_ret.add_argument("--query-embeddings", help="EMB1 file holding query embeddings")
    p_ret.add_argument("--out", help="output path (default: stdout)")
    p_ret.add_argument("--format", choices=["json"], default="json")

    p_eval = sub.add_parser("evaluate", help="mean NDCG/diversity over a labeled dataset")
    _add_corpus_args(p_eval)
    _add_method_args(p_eval, multi=True)
    _add_eval_args(p_eval)

    p_sweep = sub.add_parser("sweep", help="evaluate across a parameter grid")
    _add_corpus_args(p_sweep)
    _add_method_args(p_sweep, multi=True)
    _add_eval_args(p_sweep)
    p_sweep.add_argument("--sigma-grid", help="comma list of sigma values for dartboard")
    p_sweep.add_argument("--lambda-grid", help="comma list of lambda values for mmr")

    p_conv = sub.add_parser("convert", help="convert a raw QA benchmark to the native shape")
    p_conv.add_argument("--input", required=True, help="raw benchmark JSON/JSONL")
    p_conv.add_argument("--passages", required=True, help="output passages JSONL")
    p_conv.add_argument("--dataset", required=True, help="output dataset JSONL")
    return parser


def _add_corpus_args(p):
    p.add_argument("--passages", help="passage JSONL ({id, text} per line)")
    p.add_argument("--embeddings", help="EMB1 file holding corpus embeddings")
    p.add_argument("--scores", help="SCM1 file holding external scores")


def _add_method_args(p, multi: bool = False):
    if multi:
        p.add_argument("--method", default="dartboard",
                       help="comma list of knn|mmr|dartboard|oracle|random|empty")
    else:
        p.add_argument("--method", default="dartboard", choices=["knn", "mmr", "dartboard"])
    p.add_argument("--kernel", default="cossim", choices=["cossim", "crosscoder", "hybrid"])
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--triage", type=int, default=DEFAULT_TRIAGE)
    p.add_argument("--sigma", type=float, default=DEFAULT_SIGMA)
    p.add_argument("--lambda", dest="mmr_lambda", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--transform", help="one_minus | negate | affine:a,b "
                                       "(overrides both kernel transforms)")


def _add_eval_args(p):
    p.add_argument("--dataset", required=True, help="labeled dataset JSONL")
    p.add_argument("--query-embeddings", help="EMB1 file holding query embeddings")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--first-hit-only", action="store_true",
                   help="credit only the first retrieved positive (simple cases)")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "retrieve":
            return cmd_retrieve(args)
        if args.command == "evaluate":
            return cmd_evaluate(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_convert(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _configure_logging():
    level = os.environ.get("DARTBOARD_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def cmd_retrieve(args) -> int:
    if args.k < 1:
        raise ValueError(f"k must be >= 1, got {args.k}")
    if not args.passages or not args.embeddings:
        raise ValueError("retrieve needs --passages and --embeddings")
    corpus, texts = fileio.load_corpus(args.passages, args.embeddings)
    qvec, qid = _resolve_query(args, corpus.dims)
    kernel = _build_kernel(args)
    request = RetrievalRequest(
        query_vec=qvec, query_id=qid, k=args.k, triage_k=args.triage,
        method=args.method, kernel=kernel,
        mmr_diversity=args.mmr_lambda if args.method == "mmr" else None,
    )
    result = retrieve(corpus, request)
    payload = [
        {"rank": i + 1, "id": pid, "text": texts[pid], "objective": obj}
        for i, (pid, obj) in enumerate(zip(result.ids, result.objectives))
    ]
    _emit(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", args.out)
    return 0


def cmd_evaluate(args) -> int:
    report = _run_report(args, sigma_grid=None, lambda_grid=None)
    _emit_report(report, args)
    return 0


def cmd_sweep(args) -> int:
    sigma_grid = _parse_grid(args.sigma_grid)
    lambda_grid = _parse_grid(args.lambda_grid)
    report = _run_report(args, sigma_grid=sigma_grid, lambda_grid=lambda_grid)
    _emit_report(report, args)
    return 0


def cmd_convert(args) -> int:
    n_cases, n_passages = fileio.convert_benchmark(args.input, args.passages, args.dataset)
    print(f"wrote {n_cases} cases and {n_passages} unique passages", file=sys.stderr)
    return 0


def _run_report(args, sigma_grid, lambda_grid):
    if args.k < 1:
        raise ValueError(f"k must be >= 1, got {args.k}")
    if not args.passages or not args.embeddings:
        raise ValueError("evaluation needs --passages and --embeddings")
    corpus, _ = fileio.load_corpus(args.passages, args.embeddings)
    cases = fileio.load_dataset(args.dataset)
    queries = fileio.read_embeddings(args.query_embeddings) if args.query_embeddings else None
    scores = fileio.read_scores(args.scores) if args.scores else None
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    plans = []
    for method in methods:
        variant = args.kernel if method in ("knn", "mmr", "dartboard") else "cossim"
        if method == "dartboard" and sigma_grid:
            plans.append(SweepPlan(method=method, kernel_variant=variant,
                                   param_name="sigma", param_values=sigma_grid))
        elif method == "mmr" and lambda_grid:
            plans.append(SweepPlan(method=method, kernel_variant=variant,
                                   param_name="lambda", param_values=lambda_grid))
        else:
            plans.append(SweepPlan(method=method, kernel_variant=variant))
    return run_sweep(cases, corpus, queries, plans, k=args.k, triage_k=args.triage,
                     seed=args.seed, scores=scores, sigma=args.sigma,
                     mmr_lambda=args.mmr_lambda, first_hit_only=args.first_hit_only)


def _emit_report(report, args):
    if args.format == "json":
        rows = [row.__dict__ for row in report.rows]
        _emit(json.dumps(rows, ensure_ascii=False, indent=2) + "\n", args.out)
    else:
        _emit(report.to_csv(), args.out)


def _parse_grid(text):
    if not text:
        return None
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ValueError(f"bad grid spec {text!r}: {exc}") from exc


def _resolve_query(args, dims):
    if args.query_vec:
        values = json.loads(args.query_vec)
        if not isinstance(values, list):
            raise ValueError("--query-vec must be a JSON array")
        return np.asarray(values, dtype=np.float64), args.query_id
    if args.query_id:
        if not args.query_embeddings:
            raise ValueError("--query-id needs --query-embeddings")
        queries = fileio.read_embeddings(args.query_embeddings)
        return queries.row(args.query_id), args.query_id
    raise ValueError("retrieve needs --query-vec or --query-id")


def _build_kernel(args):
    transform = Transform.parse(args.transform) if args.transform else None
    scores = fileio.read_scores(args.scores) if args.scores else None
    if args.method == "dartboard" or args.kernel != "cossim":
        return KernelConfig.variant(args.kernel, sigma=args.sigma, scores=scores,
                                    query_transform=transform, guess_transform=transform)
    return None


def _emit(text: str, out_path):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    sys.exit(main())
