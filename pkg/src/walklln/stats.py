"""Replica summaries.

Confidence intervals use the normal approximation with z = 1.96 (95%);
below 30 replicas the summary carries a warning flag.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Z95 = 1.96
MIN_REPLICAS_FOR_CI = 30


@dataclass(frozen=True)
class AggregateStats:
    count: int
    mean: float
    variance: float
    min: float
    max: float
    ci_halfwidth: float

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count else math.nan

    @property
    def small_sample(self) -> bool:
        return self.count < MIN_REPLICAS_FOR_CI

    @classmethod
    def from_values(cls, values) -> "AggregateStats":
        x = np.asarray(values, dtype=float)
        m = len(x)
        if m == 0:
            raise ValueError("no replica values to aggregate")
        mean = math.fsum(x) / m
        var = math.fsum((x - mean) ** 2) / (m - 1) if m > 1 else 0.0
        return cls(m, mean, var, float(x.min()), float(x.max()), Z95 * math.sqrt(var / m))

    def as_dict(self) -> dict:
        return {"count": self.count, "mean": self.mean, "variance": self.variance,
                "min": self.min, "max": self.max, "ci_halfwidth": self.ci_halfwidth}


def wilson_halfwidth(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """(point estimate, half-width) where the half-width is the larger distance
    from the point estimate to a Wilson score bound; always > 0 for trials >= 1."""
    if trials < 1:
        raise ValueError("need at least one trial")
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return p, max(abs(centre + half - p), abs(p - (centre - half)))


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log y against log x."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    lx = lx - lx.mean()
    return float(np.dot(lx, ly - ly.mean()) / np.dot(lx, lx))
