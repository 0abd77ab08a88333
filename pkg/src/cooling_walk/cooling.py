"""Cooling maps: refresh schedules tau(k), interval location, divergence
diagnostics and the constructive recurrence-breaking map.

Increments are integers (walk time is discrete).  Real-valued family
parameters are rounded to the nearest integer (ties to even, Python round)
with a floor of 1; this rounding rule is part of the reproducibility
contract.  Families whose increments outgrow 2**62 raise instead of
saturating, but their *logarithmic* increments stay available analytically
for scaling diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .alpha import AlphaLaw, Regime, classify
from .rng import derive_seed

INCREMENT_CAP = 2**62
_LOG_CAP = 62 * math.log(2.0)


class CoolingError(Exception):
    pass


class CoolingOverflowError(CoolingError):
    """An integer increment exceeded 2**62 before covering the requested time."""


class MapExhaustedError(CoolingError):
    """A finite (explicit / block) map ran out of increments."""


class NoPositiveMeanError(CoolingError):
    """No grid point had a significantly positive annealed mean."""


class BreakerInfeasibleError(CoolingError):
    """The block growth condition could not be met within the given limits."""


def _round_increment(value: float) -> int:
    if value > INCREMENT_CAP:
        raise CoolingOverflowError(f"increment {value:.3e} exceeds 2**62")
    return max(1, round(value))


@dataclass(frozen=True)
class Explicit:
    increments: tuple[int, ...]

    def increment(self, k: int) -> int:
        if k > len(self.increments):
            raise MapExhaustedError(f"explicit map has {len(self.increments)} increments")
        return self.increments[k - 1]

    def log_increment(self, k: int) -> float:
        return math.log(self.increment(k))

    @property
    def finite_length(self) -> Optional[int]:
        return len(self.increments)

    def serialize(self) -> str:
        return "explicit(T=[" + ",".join(str(t) for t in self.increments) + "])"


@dataclass(frozen=True)
class Polynomial:
    """T_k = max(1, round(B * k**beta))."""

    B: float
    beta: float

    def increment(self, k: int) -> int:
        return _round_increment(self.B * float(k) ** self.beta)

    def log_increment(self, k: int) -> float:
        v = self.B * float(k) ** self.beta
        if v > INCREMENT_CAP:
            return math.log(self.B) + self.beta * math.log(k)
        return math.log(self.increment(k))

    finite_length = None

    def serialize(self) -> str:
        return f"polynomial(B={self.B!r}, beta={self.beta!r})"


@dataclass(frozen=True)
class Exponential:
    """T_k = max(1, round(exp(c*k)))."""

    c: float

    def increment(self, k: int) -> int:
        if self.c * k > _LOG_CAP:
            raise CoolingOverflowError(f"exp({self.c}*{k}) exceeds 2**62")
        return _round_increment(math.exp(self.c * k))

    def log_increment(self, k: int) -> float:
        if self.c * k > _LOG_CAP:
            return self.c * k
        return math.log(self.increment(k))

    finite_length = None

    def serialize(self) -> str:
        return f"exponential(c={self.c!r})"


@dataclass(frozen=True)
class DoubleExp:
    """T_k = max(1, round(exp(exp(c*k))))."""

    c: float

    def _inner(self, k: int) -> float:
        return math.exp(self.c * k)

    def increment(self, k: int) -> int:
        if self._inner(k) > _LOG_CAP:
            raise CoolingOverflowError(f"exp(exp({self.c}*{k})) exceeds 2**62")
        return _round_increment(math.exp(self._inner(k)))

    def log_increment(self, k: int) -> float:
        inner = self._inner(k)
        if inner > _LOG_CAP:
            return inner
        return math.log(self.increment(k))

    finite_length = None

    def serialize(self) -> str:
        return f"double_exp(c={self.c!r})"


@dataclass(frozen=True)
class FasterDoubleExp:
    """T_k = max(1, round(exp(exp(c*k**2)))); log log T_k / k diverges."""

    c: float

    def _inner(self, k: int) -> float:
        return math.exp(self.c * k * k)

    def increment(self, k: int) -> int:
        if self._inner(k) > _LOG_CAP:
            raise CoolingOverflowError(f"exp(exp({self.c}*{k}^2)) exceeds 2**62")
        return _round_increment(math.exp(self._inner(k)))

    def log_increment(self, k: int) -> float:
        inner = self._inner(k)
        if inner > _LOG_CAP:
            return inner
        return math.log(self.increment(k))

    finite_length = None

    def serialize(self) -> str:
        return f"faster_double_exp(c={self.c!r})"


@dataclass(frozen=True)
class RepeatedBlocks:
    """blocks = ((length, count), ...): each length repeated count times."""

    blocks: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for n, cnt in self.blocks:
            if n < 1 or cnt < 1:
                raise CoolingError(f"invalid block ({n},{cnt})")

    def increment(self, k: int) -> int:
        idx = k
        for n, cnt in self.blocks:
            if idx <= cnt:
                return n
            idx -= cnt
        raise MapExhaustedError(f"block map has {self.finite_length} increments")

    def log_increment(self, k: int) -> float:
        return math.log(self.increment(k))

    @property
    def finite_length(self) -> Optional[int]:
        return sum(cnt for _, cnt in self.blocks)

    def serialize(self) -> str:
        return "blocks=[" + ",".join(f"({n},{c})" for n, c in self.blocks) + "]"


Family = Explicit | Polynomial | Exponential | DoubleExp | FasterDoubleExp | RepeatedBlocks


@dataclass(frozen=True)
class Locate:
    ell: int          # index of the interval containing n: tau(ell-1) <= n < tau(ell)
    tau_prev: int     # tau(ell-1)
    boundary_time: int  # n - tau(ell-1)


class CoolingMap:
    """A refresh schedule tau with tau(0)=0 and strictly increasing values."""

    def __init__(self, family: Family):
        self.family = family

    def __repr__(self):
        return f"CoolingMap({self.family.serialize()})"

    def __eq__(self, other):
        return isinstance(other, CoolingMap) and self.family == other.family

    def increment(self, k: int) -> int:
        """T_k for k >= 1."""
        if k < 1:
            raise CoolingError("increment index starts at 1")
        return self.family.increment(k)

    def log_increment(self, k: int) -> float:
        """log T_k, available analytically even beyond the integer cap."""
        if k < 1:
            raise CoolingError("increment index starts at 1")
        return self.family.log_increment(k)

    def increments(self, count: int) -> np.ndarray:
        return np.array([self.increment(k) for k in range(1, count + 1)], dtype=np.int64)

    def log_increments(self, count: int) -> np.ndarray:
        return np.array([self.log_increment(k) for k in range(1, count + 1)])

    @property
    def finite_length(self) -> Optional[int]:
        return self.family.finite_length

    def refresh_times_covering(self, n: int) -> np.ndarray:
        """tau(0), tau(1), ..., tau(K) with tau(K) >= n (tau(K-1) < n if n>0)."""
        taus = [0]
        k = 0
        while taus[-1] < n:
            k += 1
            t = self.increment(k)
            nxt = taus[-1] + t
            if nxt > INCREMENT_CAP:
                raise CoolingOverflowError("tau exceeded 2**62 before covering n")
            taus.append(nxt)
        if n > 0 and len(taus) == 1:
            raise CoolingError("empty cooling map")
        return np.array(taus, dtype=np.int64)

    def locate(self, n: int) -> Locate:
        """ell(n) = inf{k: tau(k) > n}, with tau(ell-1) and the boundary time.

        Satisfies sum_{k < ell(n)} T_k + boundary_time == n exactly.
        """
        if n < 0:
            raise CoolingError("time index must be >= 0")
        tau_prev = 0
        k = 0
        while True:
            k += 1
            try:
                t = self.increment(k)
            except MapExhaustedError:
                if tau_prev == n:
                    # n is the final refresh time: boundary interval is empty
                    return Locate(ell=k, tau_prev=tau_prev, boundary_time=0)
                raise
            tau_k = tau_prev + t
            if tau_k > INCREMENT_CAP:
                raise CoolingOverflowError("tau exceeded 2**62 before covering n")
            if tau_k > n:
                return Locate(ell=k, tau_prev=tau_prev, boundary_time=n - tau_prev)
            tau_prev = tau_k


def single_interval(n: int) -> CoolingMap:
    """A map whose first interval covers [0, n): RWCRE == annealed RWRE there."""
    return CoolingMap(Explicit((max(n, 1),)))


# ---------------------------------------------------------------------------
# divergence diagnostics


@dataclass(frozen=True)
class DivergenceReport:
    """Finite-horizon proxies for the divergence conditions on T_k."""

    horizon: int
    gamma: float
    head_min: float           # min T_k over the first decade of k
    tail_min: float           # min T_k over the last decade of k
    increments_diverge: bool  # proxy: tail_min > head_min
    cesaro_mean: np.ndarray   # (1/l) sum_{k<=l} T_k, l = 1..horizon
    fast_cooling_ratio: np.ndarray  # running min of k**-gamma * log T_k


def divergence_report(cmap: CoolingMap, horizon: int, gamma: float = 0.75) -> DivergenceReport:
    if horizon < 10:
        raise CoolingError("horizon must be at least 10")
    logs = cmap.log_increments(horizon)
    with np.errstate(over="ignore"):
        tvals = np.exp(logs)  # may be inf past the integer cap; fine for proxies
    ks = np.arange(1, horizon + 1, dtype=np.float64)
    head = tvals[: max(horizon // 10, 1)]
    tail = tvals[horizon - max(horizon // 10, 1):]
    cesaro = np.cumsum(tvals) / ks
    ratio = np.minimum.accumulate(logs / ks**gamma)
    return DivergenceReport(
        horizon=horizon,
        gamma=gamma,
        head_min=float(head.min()),
        tail_min=float(tail.min()),
        increments_diverge=bool(tail.min() > head.min()),
        cesaro_mean=cesaro,
        fast_cooling_ratio=ratio,
    )


# ---------------------------------------------------------------------------
# recurrence breaker (repeated blocks over times with positive annealed mean)


@dataclass(frozen=True)
class BreakerBlock:
    length: int
    count: int
    mean_estimate: float
    mean_se: float
    oracle_seed: int


@dataclass(frozen=True)
class BreakerRecord:
    cooling_map: CoolingMap
    blocks: tuple[BreakerBlock, ...]
    margin: float
    rejected: tuple[tuple[int, float, float], ...]  # (n, estimate, se) grid points not used


MeanOracle = Callable[[int, int], tuple[float, float]]


def build_recurrence_breaker(
    alpha: AlphaLaw,
    mean_oracle: MeanOracle,
    n_grid: Sequence[int],
    margin: float = 5.0,
    max_blocks: int = 2,
    seed: int = 0,
    last_block_count: int = 500,
    count_cap: int = 2**40,
) -> BreakerRecord:
    """Build a block cooling map that pushes a recurrent walk to +infinity.

    Picks increasing block lengths n_1 < n_2 < ... whose estimated annealed
    mean clears ``margin`` standard errors above zero, then solves the block
    growth condition  N_j * mean_j / 2 >= (N_{j+1} + 1) * n_{j+1}  backward
    from ``last_block_count``.  The returned record keeps every oracle
    estimate used, so the statistical construction is auditable.
    """
    if classify(alpha) is not Regime.RECURRENT:
        raise CoolingError("recurrence breaker needs a recurrent alpha")
    if max_blocks < 1:
        raise CoolingError("max_blocks must be >= 1")
    accepted: list[tuple[int, float, float, int]] = []
    rejected: list[tuple[int, float, float]] = []
    for n in sorted(set(int(n) for n in n_grid)):
        oracle_seed = derive_seed(seed, n, 0xB10C)
        est, se = mean_oracle(n, oracle_seed)
        if est > 0.0 and est > margin * se and len(accepted) < max_blocks:
            accepted.append((n, est, se, oracle_seed))
        else:
            rejected.append((n, est, se))
    if not accepted:
        raise NoPositiveMeanError(
            f"no grid point had mean > {margin} SEs above 0 (grid {sorted(set(n_grid))})"
        )
    counts = [0] * len(accepted)
    counts[-1] = last_block_count
    for j in range(len(accepted) - 2, -1, -1):
        n_next = accepted[j + 1][0]
        need = 2.0 * (counts[j + 1] + 1) * n_next / accepted[j][1]
        if need > count_cap:
            raise BreakerInfeasibleError(
                f"block {j + 1} would need {need:.3e} repeats (cap {count_cap})"
            )
        counts[j] = max(int(math.ceil(need)), 1)
    blocks = tuple(
        BreakerBlock(length=n, count=c, mean_estimate=est, mean_se=se, oracle_seed=osd)
        for (n, est, se, osd), c in zip(accepted, counts)
    )
    cmap = CoolingMap(RepeatedBlocks(tuple((b.length, b.count) for b in blocks)))
    return BreakerRecord(
        cooling_map=cmap, blocks=blocks, margin=margin, rejected=tuple(rejected)
    )
