"""Log-space Gaussian kernels over similarities.

Similarities (cosine, or raw cross-encoder logits ingested from files) are
mapped to distances, then to unnormalized log Gaussian densities. All
selection downstream compares these log values; additive constants cancel,
so only differences matter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .vectors import EmbeddingMatrix, pairwise_similarity, similarity_row

# Floor applied to log densities so -inf never reaches LogSumExp.
LOG_FLOOR = -1e300

_HALF_LOG_2PI = 0.9189385332046727

COSINE = "cosine"
EXTERNAL = "external_scores"

VARIANTS = ("cossim", "crosscoder", "hybrid")


class KernelError(ValueError):
    """Raised for unusable kernel configuration or score lookups."""


@dataclass(frozen=True)
class Transform:
    """similarity -> distance rule applied before the Gaussian kernel.

    one_minus: 1 - s, for similarities in [-1, 1]
    negate:    -s, for raw logits where larger means closer
    affine:    a*s + b, for calibration experiments
    """

    kind: str
    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in ("one_minus", "negate", "affine"):
            raise KernelError(f"unknown transform: {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "Transform":
        """Parse 'one_minus', 'negate', or 'affine:a,b'."""
        if text.startswith("affine:"):
            parts = text.split(":", 1)[1].split(",")
            if len(parts) != 2:
                raise KernelError(f"affine transform needs 'affine:a,b', got {text!r}")
            return cls("affine", a=float(parts[0]), b=float(parts[1]))
        return cls(text)

    def __call__(self, s):
        if self.kind == "one_minus":
            return 1.0 - np.asarray(s, dtype=np.float64)
        if self.kind == "negate":
            return -np.asarray(s, dtype=np.float64)
        return self.a * np.asarray(s, dtype=np.float64) + self.b


ONE_MINUS = Transform("one_minus")
NEGATE = Transform("negate")


def similarity_to_distance(s, transform: Transform):
    """Apply a similarity -> distance transform to a scalar or array."""
    if not isinstance(transform, Transform):
        transform = Transform.parse(str(transform))
    out = transform(s)
    return float(out) if np.isscalar(s) else out


@dataclass(frozen=True)
class ScoreMatrix:
    """Raw cross-encoder scores, ingested from files and never computed here.

    `values` holds query x passage scores. `pair_values`, when present, holds
    passage x passage scores exactly as given (asymmetric allowed); they are
    symmetrized only via symmetrize_pair_scores at use time.
    """

    query_ids: tuple
    passage_ids: tuple
    values: np.ndarray
    pair_values: np.ndarray | None = None
    _qindex: dict = field(init=False, repr=False, compare=False)
    _pindex: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise KernelError(f"score values must be 2-D, got shape {values.shape}")
        if values.shape != (len(self.query_ids), len(self.passage_ids)):
            raise KernelError(
                f"score shape {values.shape} does not match "
                f"{len(self.query_ids)} query ids x {len(self.passage_ids)} passage ids"
            )
        if not np.isfinite(values).all():
            raise KernelError("score matrix contains non-finite values")
        values.setflags(write=False)
        pair = self.pair_values
        if pair is not None:
            pair = np.array(pair, dtype=np.float64)
            n = len(self.passage_ids)
            if pair.shape != (n, n):
                raise KernelError(
                    f"pair score shape {pair.shape} does not match {n} passage ids"
                )
            if not np.isfinite(pair).all():
                raise KernelError("pair score matrix contains non-finite values")
            pair.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "pair_values", pair)
        object.__setattr__(self, "query_ids", tuple(self.query_ids))
        object.__setattr__(self, "passage_ids", tuple(self.passage_ids))
        object.__setattr__(self, "_qindex", {q: i for i, q in enumerate(self.query_ids)})
        object.__setattr__(self, "_pindex", {p: i for i, p in enumerate(self.passage_ids)})

    def query_row(self, query_id, passage_ids) -> np.ndarray:
        """Scores of one query against the given passages, in the given order."""
        try:
            qi = self._qindex[query_id]
        except KeyError:
            raise KernelError(f"no score row for query id {query_id!r}") from None
        cols = self._passage_indices(passage_ids)
        return self.values[qi, cols]

    def pair_block(self, passage_ids) -> np.ndarray:
        """Raw pair scores restricted to the given passages (not symmetrized)."""
        if self.pair_values is None:
            raise KernelError("score matrix has no passage-pair block")
        idx = self._passage_indices(passage_ids)
        return self.pair_values[np.ix_(idx, idx)]

    def _passage_indices(self, passage_ids) -> np.ndarray:
        idx = []
        for pid in passage_ids:
            try:
                idx.append(self._pindex[pid])
            except KeyError:
                raise KernelError(f"no scores for passage id {pid!r}") from None
        return np.asarray(idx, dtype=np.intp)


@dataclass(frozen=True)
class KernelConfig:
    """Spread and similarity sources for the query and guess kernels.

    Sources: cosine over embeddings, or externally supplied raw scores.
    A ScoreMatrix must be attached whenever either source is external.
    Transforms default per source (one_minus for cosine, negate for logits).
    """

    sigma: float
    query_source: str = COSINE
    guess_source: str = COSINE
    query_transform: Transform | None = None
    guess_transform: Transform | None = None
    scores: ScoreMatrix | None = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise KernelError(f"sigma must be positive, got {self.sigma}")
        for source in (self.query_source, self.guess_source):
            if source not in (COSINE, EXTERNAL):
                raise KernelError(f"unknown similarity source: {source!r}")

    @classmethod
    def variant(cls, name: str, sigma: float, scores: ScoreMatrix | None = None,
                query_transform: Transform | None = None,
                guess_transform: Transform | None = None) -> "KernelConfig":
        """cossim: cosine both; crosscoder: scores both; hybrid: scores for the
        query kernel, cosine for the guess kernel."""
        if name == "cossim":
            sources = (COSINE, COSINE)
        elif name == "crosscoder":
            sources = (EXTERNAL, EXTERNAL)
        elif name == "hybrid":
            sources = (EXTERNAL, COSINE)
        else:
            raise KernelError(f"unknown kernel variant: {name!r} (want one of {VARIANTS})")
        return cls(sigma=sigma, query_source=sources[0], guess_source=sources[1],
                   query_transform=query_transform, guess_transform=guess_transform,
                   scores=scores)

    def resolved_query_transform(self) -> Transform:
        if self.query_transform is not None:
            return self.query_transform
        return ONE_MINUS if self.query_source == COSINE else NEGATE

    def resolved_guess_transform(self) -> Transform:
        if self.guess_transform is not None:
            return self.guess_transform
        return ONE_MINUS if self.guess_source == COSINE else NEGATE

    def _require_scores(self) -> ScoreMatrix:
        if self.scores is None:
            raise KernelError(
                "kernel source is external_scores but no score matrix is attached"
            )
        return self.scores


def log_norm(mu, sigma: float):
    """Natural log of the Gaussian density at distance mu, floored at LOG_FLOOR."""
    if not sigma > 0:
        raise KernelError(f"sigma must be positive, got {sigma}")
    mu = np.asarray(mu, dtype=np.float64)
    with np.errstate(over="ignore"):
        out = -np.log(sigma) - _HALF_LOG_2PI - np.square(mu) / (2.0 * sigma * sigma)
    out = np.maximum(out, LOG_FLOOR)
    return float(out) if out.ndim == 0 else out


def query_log_probs(query_vec, candidates: EmbeddingMatrix, config: KernelConfig,
                    query_id=None) -> np.ndarray:
    """Log kernel of the query against each candidate, in candidate order.

    Cosine source reads the query vector; the external source reads the
    attached score row for `query_id` (direction query -> passage only).
    """
    if config.query_source == COSINE:
        if query_vec is None:
            raise KernelError("cosine query kernel needs a query vector")
        sims = similarity_row(query_vec, candidates)
    else:
        if query_id is None:
            raise KernelError("external query kernel needs a query id")
        sims = config._require_scores().query_row(query_id, candidates.ids)
    mu = config.resolved_query_transform()(sims)
    return log_norm(mu, config.sigma)


def guess_log_prob_matrix(candidates: EmbeddingMatrix, config: KernelConfig) -> np.ndarray:
    """Symmetric candidate x candidate log kernel matrix.

    External pair scores are symmetrized by averaging before the transform.
    """
    if config.guess_source == COSINE:
        sims = pairwise_similarity(candidates)
    else:
        sims = symmetrize_pair_scores(config._require_scores().pair_block(candidates.ids))
    mu = config.resolved_guess_transform()(sims)
    return log_norm(mu, config.sigma)


def symmetrize_pair_scores(raw: np.ndarray) -> np.ndarray:
    """Average the two directions of an asymmetric score matrix."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
        raise KernelError(f"pair scores must be square, got shape {raw.shape}")
    if not np.isfinite(raw).all():
        raise KernelError("pair scores contain non-finite values")
    return (raw + raw.T) / 2.0
