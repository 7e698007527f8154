"""Stability metrics computed across repeated estimation runs."""

from __future__ import annotations

import numpy as np

from .core import DimensionError

EFFICIENCY_FLOOR = 1e-8


def var_reduc(raw: np.ndarray, cv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature fraction of across-repetition variance removed by the
    correction: (Var(raw) - Var(cv)) / Var(raw).

    Returns (reduction, defined); features whose baseline variance is zero are
    flagged undefined and get reduction 0. Values are at most 1 and can be
    negative when the correction hurts.
    """
    raw = np.asarray(raw, dtype=float)
    cv = np.asarray(cv, dtype=float)
    if raw.shape != cv.shape or raw.ndim != 2:
        raise DimensionError("expected matching (repetitions, d) matrices")
    if raw.shape[0] < 2:
        raise ValueError("need at least 2 repetitions")
    var_raw = raw.var(axis=0, ddof=1)
    var_cv = cv.var(axis=0, ddof=1)
    defined = var_raw > 0.0
    out = np.zeros(raw.shape[1])
    out[defined] = (var_raw[defined] - var_cv[defined]) / var_raw[defined]
    return out, defined


def _ranks_by_magnitude(estimates: np.ndarray) -> np.ndarray:
    """Rank features by descending |value| within each repetition, ties broken
    by feature index."""
    reps, d = estimates.shape
    ranks = np.empty((reps, d), dtype=np.int64)
    for r in range(reps):
        order = np.lexsort((np.arange(d), -np.abs(estimates[r])))
        ranks[r, order] = np.arange(d)
    return ranks


def rank_changes(estimates: np.ndarray) -> float:
    """Average total rank displacement between pairs of repetitions.

    For each unordered pair of repetitions, sum |rank_j(a) - rank_j(b)| over
    features; average over the C(R, 2) pairs.
    """
    estimates = np.asarray(estimates, dtype=float)
    if estimates.ndim != 2 or estimates.shape[0] < 2:
        raise DimensionError("expected a (repetitions >= 2, d) matrix")
    ranks = _ranks_by_magnitude(estimates)
    reps = ranks.shape[0]
    diffs = np.abs(ranks[:, None, :] - ranks[None, :, :]).sum(axis=2)
    total = diffs[np.triu_indices(reps, k=1)].sum()
    return float(total / (reps * (reps - 1) / 2))


def efficiency_gap(estimates: np.ndarray, f_x: float, v_empty: float) -> np.ndarray:
    """Normalized distance of the attribution sum from its known target
    f(x) - v(empty), per repetition."""
    estimates = np.atleast_2d(np.asarray(estimates, dtype=float))
    target = f_x - v_empty
    denom = max(abs(target), EFFICIENCY_FLOOR)
    return np.abs(estimates.sum(axis=1) - target) / denom
