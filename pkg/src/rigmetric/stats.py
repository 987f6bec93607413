"""Product-moment and rank correlation for metric-vs-accuracy tables."""

from __future__ import annotations

import numpy as np
from scipy import stats


class CorrelationError(ValueError):
    pass


def _pair(xs, ys) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise CorrelationError("series must be one-dimensional and of equal length")
    if len(x) < 3:
        raise CorrelationError(f"need at least 3 pairs, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise CorrelationError("series must be finite")
    return x, y


def pearson(xs, ys) -> float:
    x, y = _pair(xs, ys)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise CorrelationError("correlation is undefined for a constant series")
    return float(np.clip(stats.pearsonr(x, y).statistic, -1.0, 1.0))


def spearman(xs, ys) -> float:
    """Pearson correlation of average ranks (ties share the mean rank)."""
    x, y = _pair(xs, ys)
    return pearson(stats.rankdata(x, method="average"), stats.rankdata(y, method="average"))
