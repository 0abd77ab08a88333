"""Shared statistical utilities: empirical CDFs, KS distance, moment
estimators with standard errors, trend tests and the seed-derivation function.

KS against an exact CDF is the single acceptance metric used for
distributional claims throughout the package; the asymptotic 5% critical
value is 1.36/sqrt(n), quoted with an explicit slack factor where limits are
log-slow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .rng import derive_seed  # noqa: F401  (public re-export)

KS_COEFF_5PCT = 1.36


def ks_critical(n: int, slack: float = 1.0) -> float:
    """Asymptotic 5% KS critical value for sample size ``n``, times ``slack``."""
    return KS_COEFF_5PCT / math.sqrt(n) * slack


@dataclass(frozen=True)
class EmpiricalSample:
    """A sorted sample of real values."""

    values: np.ndarray  # sorted ascending
    count: int

    @classmethod
    def from_values(cls, values) -> "EmpiricalSample":
        arr = np.sort(np.asarray(values, dtype=np.float64))
        if arr.size < 1:
            raise ValueError("empirical sample needs at least one value")
        return cls(values=arr, count=int(arr.size))

    def cdf(self, x: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.values, x, side="right") / self.count


def ks_distance(sample: EmpiricalSample, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """sup_x |F_n(x) - F(x)|, one-sided gaps at the sample points.

    The lower gap compares against the left limit F(x-), so step CDFs (exact
    walk distributions) are handled exactly; for continuous F this reduces to
    the usual max(i/n - F(x_i), F(x_i) - (i-1)/n).
    """
    n = sample.count
    f = np.asarray(cdf(sample.values), dtype=np.float64)
    f_left = np.asarray(cdf(np.nextafter(sample.values, -np.inf)), dtype=np.float64)
    upper = np.arange(1, n + 1) / n - f
    lower = f_left - np.arange(0, n) / n
    return float(max(upper.max(), lower.max(), 0.0))


@dataclass(frozen=True)
class MomentReportStats:
    mean: float
    mean_se: float
    variance: float
    variance_se: float
    skew: float
    skew_se: float
    count: int
    degenerate: bool


def moments_with_se(values, batch_size: int | None = None) -> MomentReportStats:
    """Mean/variance/skew with standard errors.

    ``batch_size`` switches the mean SE to batch means, for dependent streams.
    Variance SE uses the kurtosis-robust formula (heavy-tailed samples are the
    common case here).
    """
    x = np.asarray(values, dtype=np.float64)
    n = x.size
    if n < 2:
        raise ValueError("need at least two values for moments with SEs")
    mean = float(x.mean())
    d = x - mean
    m2 = float(np.mean(d * d))
    m3 = float(np.mean(d**3))
    m4 = float(np.mean(d**4))
    var = m2 * n / (n - 1)
    degenerate = var == 0.0
    if batch_size:
        nb = n // batch_size
        bm = x[: nb * batch_size].reshape(nb, batch_size).mean(axis=1)
        mean_se = float(bm.std(ddof=1) / math.sqrt(nb)) if nb > 1 else float("nan")
    else:
        mean_se = math.sqrt(var / n) if not degenerate else 0.0
    if degenerate:
        return MomentReportStats(mean, mean_se, 0.0, 0.0, 0.0, 0.0, n, True)
    var_se = math.sqrt(max(m4 - (n - 3) / (n - 1) * m2 * m2, 0.0) / n)
    if n >= 3:
        skew = m3 / m2**1.5
        skew_se = math.sqrt(6.0 * n * (n - 1) / ((n - 2) * (n + 1) * (n + 3)))
    else:
        skew = skew_se = math.nan
    return MomentReportStats(mean, mean_se, var, var_se, skew, skew_se, n, False)


@dataclass
class StreamingMoments:
    """Mergeable accumulator (count, sum, sum of squares, min/max).

    Merging is associative and commutative, so parallel reductions are
    scheduling-independent as long as the final combine runs in index order.
    """

    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0
    minimum: float = math.inf
    maximum: float = -math.inf

    def add_array(self, values: np.ndarray) -> None:
        v = np.asarray(values, dtype=np.float64)
        self.count += v.size
        self.total += float(v.sum())
        self.total_sq += float((v * v).sum())
        if v.size:
            self.minimum = min(self.minimum, float(v.min()))
            self.maximum = max(self.maximum, float(v.max()))

    def merge(self, other: "StreamingMoments") -> "StreamingMoments":
        out = StreamingMoments(
            count=self.count + other.count,
            total=self.total + other.total,
            total_sq=self.total_sq + other.total_sq,
            minimum=min(self.minimum, other.minimum),
            maximum=max(self.maximum, other.maximum),
        )
        return out

    @property
    def mean(self) -> float:
        return self.total / self.count

    @property
    def variance(self) -> float:
        m = self.mean
        return max(self.total_sq / self.count - m * m, 0.0) * self.count / max(self.count - 1, 1)


@dataclass(frozen=True)
class TrendTest:
    statistic: int
    z: float
    p_upward: float
    p_downward: float
    n_pairs_used: int


def mann_kendall(values: Sequence[float], ses: Sequence[float] | None = None, se_kappa: float = 2.0) -> TrendTest:
    """Mann-Kendall-style trend test.

    When per-value standard errors are supplied, pairs whose difference is
    within ``se_kappa`` combined SEs count as ties; a rank test run on
    model-smoothed, nearly constant sequences would otherwise report their
    microscopic monotonicity as a significant trend.
    """
    x = np.asarray(values, dtype=np.float64)
    n = x.size
    se = None if ses is None else np.asarray(ses, dtype=np.float64)
    s = 0
    used = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            diff = x[j] - x[i]
            if se is not None:
                gate = se_kappa * math.hypot(se[i], se[j])
                if abs(diff) <= gate:
                    continue
            s += 1 if diff > 0 else (-1 if diff < 0 else 0)
            used += 1
    var_s = n * (n - 1) * (2 * n + 5) / 18.0
    if var_s <= 0:
        return TrendTest(s, 0.0, 1.0, 1.0, used)
    if s > 0:
        z = (s - 1) / math.sqrt(var_s)
    elif s < 0:
        z = (s + 1) / math.sqrt(var_s)
    else:
        z = 0.0
    p_up = float(0.5 * math.erfc(z / math.sqrt(2.0)))
    p_down = float(0.5 * math.erfc(-z / math.sqrt(2.0)))
    return TrendTest(s, z, p_up, p_down, used)


def binomial_se(p_hat: float, n: int) -> float:
    return math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / n)
