"""Dense embedding storage and cosine-similarity primitives.

Everything here is immutable after construction and free of side effects,
so matrices and the operations on them are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PassageId = str | int


class VectorError(ValueError):
    """Raised for malformed vectors, matrices, or id bookkeeping."""


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Row-major matrix of passage embeddings with one stable id per row.

    Values are stored as float64 and never renormalized; cosine similarity
    divides by norms on every call.
    """

    ids: tuple[PassageId, ...]
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise VectorError(f"embedding data must be 2-D, got shape {data.shape}")
        if data.shape[1] < 1:
            raise VectorError("embedding dimensionality must be >= 1")
        if not np.isfinite(data).all():
            raise VectorError("embedding data contains non-finite values")
        ids = tuple(self.ids)
        if len(ids) != data.shape[0]:
            raise VectorError(
                f"id count {len(ids)} does not match row count {data.shape[0]}"
            )
        if len(set(ids)) != len(ids):
            seen, dupes = set(), []
            for pid in ids:
                if pid in seen:
                    dupes.append(pid)
                seen.add(pid)
            raise VectorError(f"duplicate passage ids: {dupes}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "ids", ids)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> int:
        return self.data.shape[1]

    def index_of(self, pid: PassageId) -> int:
        try:
            return self.ids.index(pid)
        except ValueError:
            raise KeyError(f"unknown passage id: {pid!r}") from None

    def row(self, pid: PassageId) -> np.ndarray:
        return self.data[self.index_of(pid)]

    def subset(self, indices) -> "EmbeddingMatrix":
        """New matrix holding the given rows, in the given order."""
        indices = list(indices)
        return EmbeddingMatrix(
            ids=tuple(self.ids[i] for i in indices),
            data=self.data[indices],
        )


def as_query_vector(values, dims: int | None = None) -> np.ndarray:
    """Validate and return a query vector: finite, nonzero norm, right length."""
    q = np.asarray(values, dtype=np.float64)
    if q.ndim != 1:
        raise VectorError(f"query vector must be 1-D, got shape {q.shape}")
    if dims is not None and q.shape[0] != dims:
        raise VectorError(f"query has {q.shape[0]} dims, corpus has {dims}")
    if not np.isfinite(q).all():
        raise VectorError("query vector contains non-finite values")
    if np.linalg.norm(q) == 0.0:
        raise VectorError("query vector has zero norm")
    return q


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise VectorError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise VectorError("cosine similarity undefined for zero-norm vectors")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def similarity_row(query, matrix: EmbeddingMatrix) -> np.ndarray:
    """Cosine similarity of the query against every row, in row order."""
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != matrix.dims:
        raise VectorError(
            f"dimension mismatch: query {q.shape} vs matrix dims {matrix.dims}"
        )
    if matrix.rows == 0:
        return np.empty(0, dtype=np.float64)
    qn = np.linalg.norm(q)
    if qn == 0.0:
        raise VectorError("cosine similarity undefined for zero-norm vectors")
    norms = np.linalg.norm(matrix.data, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise VectorError(f"zero-norm embedding row for id {matrix.ids[zero[0]]!r}")
    sims = matrix.data @ q / (norms * qn)
    return np.clip(sims, -1.0, 1.0)


def pairwise_similarity(matrix: EmbeddingMatrix) -> np.ndarray:
    """Symmetric rows x rows cosine matrix with an exact unit diagonal."""
    if matrix.rows < 1:
        raise VectorError("pairwise similarity needs at least one row")
    norms = np.linalg.norm(matrix.data, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise VectorError(f"zero-norm embedding row for id {matrix.ids[zero[0]]!r}")
    unit = matrix.data / norms[:, None]
    sims = unit @ unit.T
    # BLAS output is not guaranteed bit-symmetric; downstream kernels assume it is.
    sims = (sims + sims.T) / 2.0
    np.fill_diagonal(sims, 1.0)
    return np.clip(sims, -1.0, 1.0)
