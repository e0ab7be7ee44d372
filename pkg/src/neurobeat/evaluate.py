"""Onset scoring: tolerance-window matching, P/R/F, sweeps, per-subject statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .core import OnsetAnnotation
from .errors import DegenerateInput, EmptyInput
from .rng import make_rng

DEFAULT_TOLERANCES = (0.05, 0.1, 0.15, 0.25, 0.5, 0.75, 1.0, 2.0)


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f_measure: float
    n_ref: int
    n_est: int
    n_tp: int


@dataclass(frozen=True)
class SweepRow:
    tolerance_s: float
    metrics: Metrics


def _times(ann) -> np.ndarray:
    if isinstance(ann, OnsetAnnotation):
        return ann.times_s
    return np.asarray(ann, dtype=np.float64).reshape(-1)


def match_onsets(ref, est, tol_s: float) -> list[tuple[int, int]]:
    """Maximum-cardinality matching of reference to estimated onsets.

    An edge ``(i, j)`` exists when ``|ref[i] - est[j]| <= tol_s``.  Returns
    ``(ref_index, est_index)`` pairs sorted by reference index.
    """
    if not tol_s > 0:
        raise ValueError("tolerance must be positive")
    ref, est = _times(ref), _times(est)
    if ref.size == 0 or est.size == 0:
        return []
    # Sorted inputs: each reference's candidates are a contiguous est range.
    lo = np.searchsorted(est, ref - tol_s, side="left")
    hi = np.searchsorted(est, ref + tol_s, side="right")
    rows, cols = [], []
    for i in range(ref.size):
        for j in range(max(lo[i] - 1, 0), min(hi[i] + 1, est.size)):
            if abs(ref[i] - est[j]) <= tol_s:
                rows.append(i)
                cols.append(j)
    if not rows:
        return []
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(ref.size, est.size))
    est_of_ref = maximum_bipartite_matching(graph, perm_type="column")
    return [(i, int(j)) for i, j in enumerate(est_of_ref) if j >= 0]


def prf_metrics(matching, n_ref: int, n_est: int) -> Metrics:
    n_tp = len(matching) if not isinstance(matching, int) else matching
    if n_ref == 0 or n_est == 0:
        return Metrics(0.0, 0.0, 0.0, n_ref, n_est, n_tp)
    precision = n_tp / n_est
    recall = n_tp / n_ref
    f = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return Metrics(precision, recall, f, n_ref, n_est, n_tp)


def evaluate_onsets(ref, est, tol_s: float = 0.05) -> Metrics:
    ref, est = _times(ref), _times(est)
    return prf_metrics(match_onsets(ref, est, tol_s), ref.size, est.size)


def tolerance_sweep(ref, est, tolerances=DEFAULT_TOLERANCES) -> list[SweepRow]:
    return [SweepRow(float(tol), evaluate_onsets(ref, est, tol)) for tol in tolerances]


def aggregate_subjects(values) -> dict[str, float]:
    """Mean, population std and five-number summary (linear quantiles)."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise EmptyInput("no values to aggregate")
    q1, median, q3 = np.quantile(x, [0.25, 0.5, 0.75])
    return {
        "n": int(x.size),
        "mean": float(x.mean()),
        "std": float(x.std()),
        "min": float(x.min()),
        "q1": float(q1),
        "median": float(median),
        "q3": float(q3),
        "max": float(x.max()),
    }


def _check_pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DegenerateInput("inputs must be 1-D and of equal length")
    if x.size < 3:
        raise DegenerateInput("need at least 3 observations")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DegenerateInput("correlation undefined for a constant input")
    return x, y


def _r(x, y):
    xc = x - x.mean()
    yc = y - y.mean(axis=-1, keepdims=True)
    num = yc @ xc
    den = np.sqrt((xc @ xc) * np.einsum("...i,...i->...", yc, yc))
    return np.clip(num / den, -1.0, 1.0)


def pearson_r(x, y) -> float:
    x, y = _check_pair(x, y)
    return float(_r(x, y))


def permutation_pvalue(x, y, n_perm: int = 10000, seed: int = 0) -> float:
    """Two-sided permutation p-value for the Pearson correlation."""
    x, y = _check_pair(x, y)
    observed = abs(_r(x, y))
    rng = make_rng(seed)
    perms = np.stack([rng.permutation(y) for _ in range(n_perm)])
    null = np.abs(_r(x, perms))
    # Tolerance guards against float noise on exact ties with the observed value.
    hits = int(np.count_nonzero(null >= observed - 1e-12))
    return (1 + hits) / (n_perm + 1)
