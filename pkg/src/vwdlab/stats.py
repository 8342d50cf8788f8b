"""Small statistical helpers shared by the CNN and evaluation code."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class Interval:
    mean: float
    low: float
    high: float
    n: int

    @property
    def half_width(self) -> float:
        return (self.high - self.low) / 2.0

    def to_dict(self) -> dict:
        return {"mean": self.mean, "ci_low": self.low, "ci_high": self.high, "n": self.n}


def t_interval(values, confidence: float = 0.95) -> Interval:
    """Two-sided t-interval of the mean; NaNs are dropped, n < 2 gives a NaN interval."""
    v = np.asarray(values, dtype=np.float64).ravel()
    v = v[~np.isnan(v)]
    n = int(v.size)
    if n == 0:
        return Interval(math.nan, math.nan, math.nan, 0)
    mean = float(v.mean())
    if n < 2:
        return Interval(mean, math.nan, math.nan, 1)
    half = float(stats.t.ppf(0.5 + confidence / 2.0, n - 1) * v.std(ddof=1) / math.sqrt(n))
    return Interval(mean, mean - half, mean + half, n)


def t_band(rows, confidence: float = 0.95):
    """Column-wise mean and t-interval bounds of a ``(n, m)`` array (n >= 2)."""
    a = np.asarray(rows, dtype=np.float64)
    n = a.shape[0]
    mean = a.mean(axis=0)
    half = stats.t.ppf(0.5 + confidence / 2.0, n - 1) * a.std(axis=0, ddof=1) / math.sqrt(n)
    return mean, mean - half, mean + half
