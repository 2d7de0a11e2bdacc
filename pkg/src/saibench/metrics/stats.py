from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import Histogram
from ..sampling import bin_index


@dataclass(frozen=True)
class CorrelationResult:
    x_name: str
    y_name: str
    n: int
    pearson_r: float
    slope: float
    intercept: float

    def to_dict(self) -> dict:
        return {
            "x_name": self.x_name,
            "y_name": self.y_name,
            "n": self.n,
            "pearson_r": self.pearson_r,
            "slope": self.slope,
            "intercept": self.intercept,
        }


def pearson_linfit(xs: Sequence[float], ys: Sequence[float], x_name: str = "x", y_name: str = "y") -> CorrelationResult:
    """Pearson r and the least-squares line y = slope * x + intercept.

    r is reported as 0 when ys are constant.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-D and of equal length")
    n = len(x)
    if n < 2:
        raise ValueError("correlation needs at least 2 points")
    dx = x - math.fsum(x) / n
    dy = y - math.fsum(y) / n
    sxx = math.fsum(dx * dx)
    syy = math.fsum(dy * dy)
    sxy = math.fsum(dx * dy)
    if sxx == 0:
        raise ValueError(f"{x_name} has zero variance")
    slope = sxy / sxx
    intercept = math.fsum(y) / n - slope * math.fsum(x) / n
    r = sxy / math.sqrt(sxx * syy) if syy > 0 else 0.0
    return CorrelationResult(x_name, y_name, n, max(-1.0, min(1.0, r)), slope, intercept)


def histogram(values: Sequence[float], n_bins: int, lo: float | None = None, hi: float | None = None) -> Histogram:
    """Fixed-width histogram with the last bin closed above.

    Without an explicit range the data min/max is used; a degenerate range
    is widened to [lo, lo + 1]. Values outside an explicit range raise.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    v = [float(x) for x in values]
    if lo is None or hi is None:
        if not v:
            raise ValueError("empty input needs an explicit range")
        lo = min(v) if lo is None else lo
        hi = max(v) if hi is None else hi
    if hi < lo:
        raise ValueError(f"histogram range [{lo}, {hi}] is inverted")
    if hi == lo:
        hi = lo + 1.0
    outside = [x for x in v if not lo <= x <= hi]
    if outside:
        raise ValueError(f"{len(outside)} value(s) outside [{lo}, {hi}]")
    counts = [0] * n_bins
    for x in v:
        counts[bin_index(x, lo, hi, n_bins)] += 1
    w = (hi - lo) / n_bins
    edges = tuple(lo + k * w for k in range(n_bins)) + (hi,)
    return Histogram(edges, tuple(counts))


def tukey_outliers(samples: Sequence[float], k: float = 1.5) -> np.ndarray:
    """Flags samples outside [Q1 - k*IQR, Q3 + k*IQR]."""
    x = np.asarray(samples, dtype=np.float64)
    q1, q3 = np.percentile(x, [25, 75])
    iqr = q3 - q1
    return (x < q1 - k * iqr) | (x > q3 + k * iqr)
