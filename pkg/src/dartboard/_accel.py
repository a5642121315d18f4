"""Hot selection loops: numba-jitted kernels with pure-numpy fallbacks.

The numpy path is always available; the jitted path is used when numba
imports and the env var DARTBOARD_NUMBA is not set to 0/false/off.
Both paths implement identical argmax and tie-break semantics:

  * strictly greater score wins;
  * on an exact score tie, a candidate that strictly raises the running
    max of guess kernels beats one that does not (at tiny spreads the
    marginal gain of a distant candidate underflows, so without this rule
    a zero-gain duplicate would win the tie by index);
  * remaining ties go to the lowest candidate index.

fastmath stays off: tie-breaking compares floats for exact equality.
"""

from __future__ import annotations

import os

import numpy as np

_env = os.environ.get("DARTBOARD_NUMBA", "").strip().lower()
_WANT_NUMBA = _env not in ("0", "false", "no", "off")

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False


def greedy_core_numpy(Q: np.ndarray, D: np.ndarray, k: int):
    """Greedy subset selection maximizing LogSumExp(max-of-selected + Q).

    Q: (n,) query log kernels. D: (n, n) symmetric guess log kernels.
    Returns (selected indices, per-step objective values), both length k.
    Seeds with argmax(Q); each later step picks the unselected candidate
    whose row, folded into the running elementwise max, maximizes the
    objective.
    """
    n = Q.shape[0]
    sel = np.empty(k, dtype=np.int64)
    objs = np.empty(k, dtype=np.float64)
    m = int(np.argmax(Q))
    maxes = D[m].copy()
    sel[0] = m
    objs[0] = _lse_numpy(maxes + Q)
    taken = np.zeros(n, dtype=bool)
    taken[m] = True
    for step in range(1, k):
        newmax = np.maximum(maxes[None, :], D)
        shifted = newmax + Q[None, :]
        row_max = shifted.max(axis=1)
        scores = row_max + np.log(np.exp(shifted - row_max[:, None]).sum(axis=1))
        improved = (D > maxes[None, :]).any(axis=1)
        scores[taken] = -np.inf
        best = scores.max()
        tied = scores == best
        tied_improved = tied & improved
        best_i = int(np.argmax(tied_improved if tied_improved.any() else tied))
        sel[step] = best_i
        objs[step] = scores[best_i]
        maxes = np.maximum(maxes, D[best_i])
        taken[best_i] = True
        if __debug__:
            assert np.array_equal(maxes, D[sel[: step + 1]].max(axis=0))
    return sel, objs


def mmr_core_numpy(rel: np.ndarray, sims: np.ndarray, lam: float, k: int):
    """Greedy marginal-relevance selection without item replacement.

    Per step maximizes (1-lam)*rel - lam*max_sim_to_selected; exact score
    ties prefer the lower max-similarity (more novel) candidate, then the
    lower index.
    """
    n = rel.shape[0]
    sel = np.empty(k, dtype=np.int64)
    scores_out = np.empty(k, dtype=np.float64)
    taken = np.zeros(n, dtype=bool)
    novelty = np.zeros(n, dtype=np.float64)
    for step in range(k):
        scores = (1.0 - lam) * rel - lam * novelty
        masked = np.where(taken, -np.inf, scores)
        best = masked.max()
        tied = masked == best
        if tied.sum() > 1:
            best_i = int(np.argmin(np.where(tied, novelty, np.inf)))
        else:
            best_i = int(np.argmax(tied))
        sel[step] = best_i
        scores_out[step] = scores[best_i]
        taken[best_i] = True
        novelty = np.maximum(novelty, sims[best_i])
    return sel, scores_out


def _lse_numpy(v: np.ndarray) -> float:
    m = v.max()
    return float(m + np.log(np.exp(v - m).sum()))


def _greedy_loops(Q, D, k):
    n = Q.shape[0]
    sel = np.empty(k, dtype=np.int64)
    objs = np.empty(k, dtype=np.float64)
    m = 0
    for i in range(1, n):
        if Q[i] > Q[m]:
            m = i
    maxes = np.empty(n, dtype=np.float64)
    for t in range(n):
        maxes[t] = D[m, t]
    mx = -np.inf
    for t in range(n):
        v = maxes[t] + Q[t]
        if v > mx:
            mx = v
    total = 0.0
    for t in range(n):
        total += np.exp(maxes[t] + Q[t] - mx)
    sel[0] = m
    objs[0] = mx + np.log(total)
    taken = np.zeros(n, dtype=np.bool_)
    taken[m] = True
    for step in range(1, k):
        best_i = -1
        best_s = -np.inf
        best_improved = False
        for i in range(n):
            if taken[i]:
                continue
            improved = False
            mx = -np.inf
            for t in range(n):
                v = D[i, t]
                if v > maxes[t]:
                    improved = True
                else:
                    v = maxes[t]
                v += Q[t]
                if v > mx:
                    mx = v
            total = 0.0
            for t in range(n):
                v = D[i, t]
                if v < maxes[t]:
                    v = maxes[t]
                total += np.exp(v + Q[t] - mx)
            s = mx + np.log(total)
            if s > best_s or (s == best_s and improved and not best_improved):
                best_s = s
                best_i = i
                best_improved = improved
        sel[step] = best_i
        objs[step] = best_s
        for t in range(n):
            if D[best_i, t] > maxes[t]:
                maxes[t] = D[best_i, t]
        taken[best_i] = True
    return sel, objs


def _mmr_loops(rel, sims, lam, k):
    n = rel.shape[0]
    sel = np.empty(k, dtype=np.int64)
    scores_out = np.empty(k, dtype=np.float64)
    taken = np.zeros(n, dtype=np.bool_)
    novelty = np.zeros(n, dtype=np.float64)
    for step in range(k):
        best_i = -1
        best_s = -np.inf
        best_nov = np.inf
        for i in range(n):
            if taken[i]:
                continue
            s = (1.0 - lam) * rel[i] - lam * novelty[i]
            if s > best_s or (s == best_s and novelty[i] < best_nov):
                best_s = s
                best_i = i
                best_nov = novelty[i]
        sel[step] = best_i
        scores_out[step] = best_s
        taken[best_i] = True
        for j in range(n):
            if sims[best_i, j] > novelty[j]:
                novelty[j] = sims[best_i, j]
    return sel, scores_out


if HAS_NUMBA:
    greedy_core_numba = njit(cache=True)(_greedy_loops)
    mmr_core_numba = njit(cache=True)(_mmr_loops)
else:  # pragma: no cover
    greedy_core_numba = None
    mmr_core_numba = None

USE_NUMBA = HAS_NUMBA and _WANT_NUMBA

if USE_NUMBA:
    BACKEND = "numba"
    greedy_core = greedy_core_numba
    mmr_core = mmr_core_numba
else:
    BACKEND = "numpy"
    greedy_core = greedy_core_numpy
    mmr_core = mmr_core_numpy
