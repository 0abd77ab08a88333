"""Walk simulation and exact quenched oracles.

Monte Carlo goes through the numba kernels with counter-based seeding, so a
(config, seed) pair gives bit-identical batches for any worker count.  The
exact quenched distribution (forward DP) is the oracle that removes all
walk-level noise from annealed-mean and variance estimation; its default time
cap is 4096 (O(n^2) work - use MC beyond it).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .alpha import AlphaLaw, Regime, classify
from .cooling import CoolingMap
from .environment import EnvironmentWindow
from .parallel import map_indexed, replica_chunks, resolve_workers
from .rng import MASK64, derive_seed

DP_CAP_DEFAULT = 4096


def _u64(seed: int) -> np.uint64:
    return np.uint64(int(seed) & MASK64)

POSITIONS_MAGIC = b"CWALKPOS"
POSITIONS_VERSION = 1


class DPCapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class QuenchedDistribution:
    """Exact law of the walk after n steps in a fixed environment."""

    n: int
    start: int
    masses: np.ndarray  # over sites start-n .. start+n

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.start - self.n, self.start + self.n + 1)

    def prob(self, site: int) -> float:
        d = site - (self.start - self.n)
        if d < 0 or d >= self.masses.size:
            return 0.0
        return float(self.masses[d])

    def mean(self) -> float:
        return float(self.masses @ self.sites)

    def second_moment(self) -> float:
        return float(self.masses @ (self.sites.astype(np.float64) ** 2))

    def variance(self) -> float:
        m = self.mean()
        return self.second_moment() - m * m

    def cdf(self, x: np.ndarray) -> np.ndarray:
        cum = np.cumsum(self.masses)
        idx = np.searchsorted(self.sites, np.asarray(x), side="right") - 1
        out = np.where(idx >= 0, cum[np.clip(idx, 0, cum.size - 1)], 0.0)
        return np.minimum(out, 1.0)


@dataclass(frozen=True)
class TrajectoryBatch:
    """Final positions (and optional increments) of independent replicas."""

    n: int
    start: int
    seed: int
    final_positions: np.ndarray
    leftmost: Optional[np.ndarray] = None
    y_increments: Optional[np.ndarray] = None   # (replicas, completed intervals)
    boundary_increments: Optional[np.ndarray] = None
    refresh_times: Optional[np.ndarray] = None

    @property
    def replicas(self) -> int:
        return int(self.final_positions.size)

    def summary(self) -> dict:
        pos = self.final_positions
        hist_sites, hist_counts = np.unique(pos, return_counts=True)
        mean = float(pos.mean())
        var = float(pos.var(ddof=1)) if pos.size > 1 else 0.0
        return {
            "replicas": self.replicas,
            "n": self.n,
            "start": self.start,
            "seed": self.seed,
            "mean": mean,
            "variance": var,
            "min": int(pos.min()),
            "max": int(pos.max()),
            "histogram": {int(s): int(c) for s, c in zip(hist_sites, hist_counts)},
        }


def write_positions(path, positions: np.ndarray) -> None:
    """Raw final positions: 16-byte header (magic, version, count), then LE int64."""
    arr = np.ascontiguousarray(positions, dtype="<i8")
    with open(path, "wb") as fh:
        fh.write(POSITIONS_MAGIC)
        fh.write(struct.pack("<II", POSITIONS_VERSION, arr.size))
        fh.write(arr.tobytes())


def read_positions(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != POSITIONS_MAGIC:
            raise ValueError(f"bad positions file magic {magic!r}")
        version, count = struct.unpack("<II", fh.read(8))
        if version != POSITIONS_VERSION:
            raise ValueError(f"unsupported positions version {version}")
        data = np.frombuffer(fh.read(8 * count), dtype="<i8")
    return data.astype(np.int64)


# ---------------------------------------------------------------------------
# Monte Carlo


def simulate_rwre(
    env: EnvironmentWindow,
    start: int,
    n: int,
    replicas: int,
    seed: int,
    workers: int | None = None,
    record_leftmost: bool = False,
) -> TrajectoryBatch:
    """Quenched RWRE: all replicas walk in the same fixed environment."""
    env = env.covering(start - n, start + n)
    values = np.ascontiguousarray(env.slice_values(start - n, start + n))
    offset = start - n
    chunks = replica_chunks(replicas, resolve_workers(workers), min_chunk=64)
    tasks = [(_u64(seed), lo, hi, n, values, offset, start) for lo, hi in chunks]
    parts = map_indexed(kernels.fixed_env_batch, tasks, workers)
    finals = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0, np.int64)
    lows = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0, np.int64)
    return TrajectoryBatch(
        n=n,
        start=start,
        seed=seed,
        final_positions=finals,
        leftmost=lows if record_leftmost else None,
    )


def simulate_rwcre(
    alpha: AlphaLaw,
    cmap: CoolingMap,
    n: int,
    replicas: int,
    seed: int,
    workers: int | None = None,
    record_increments: bool = False,
    record_leftmost: bool = False,
    max_recorded_intervals: int = 1 << 16,
) -> TrajectoryBatch:
    """RWCRE from the origin: fresh environment per (replica, interval).

    The walker's position persists across refreshes; only the environment is
    redrawn.  With ``record_increments`` the per-interval refreshed increments
    Y_k and the boundary increment are returned and reconstruct X_n exactly.
    """
    taus = cmap.refresh_times_covering(n)
    if record_increments and taus.size - 1 > max_recorded_intervals:
        raise ValueError(
            f"recording {taus.size - 1} intervals exceeds cap {max_recorded_intervals}"
        )
    omegas = np.ascontiguousarray(alpha.omegas)
    cumw = np.cumsum(alpha.weights)
    cumw[-1] = 1.0 + 1e-15
    chunks = replica_chunks(replicas, resolve_workers(workers), min_chunk=16)
    tasks = [
        (_u64(seed), lo, hi, taus, n, omegas, cumw, record_increments) for lo, hi in chunks
    ]
    parts = map_indexed(kernels.rwcre_batch, tasks, workers)
    finals = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0, np.int64)
    lows = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0, np.int64)
    y = np.concatenate([p[2] for p in parts]) if (parts and record_increments) else None
    boundary = np.concatenate([p[3] for p in parts]) if parts else np.zeros(0, np.int64)
    return TrajectoryBatch(
        n=n,
        start=0,
        seed=seed,
        final_positions=finals,
        leftmost=lows if record_leftmost else None,
        y_increments=y,
        boundary_increments=boundary if record_increments else None,
        refresh_times=taus,
    )


def sample_annealed_rwre(
    alpha: AlphaLaw, n: int, replicas: int, seed: int, workers: int | None = None
) -> TrajectoryBatch:
    """Environment-and-walk sampling of RWRE at time n (one fresh env per replica)."""
    from .cooling import single_interval

    return simulate_rwcre(alpha, single_interval(n), n, replicas, seed, workers)


# ---------------------------------------------------------------------------
# exact quenched oracles


def exact_quenched_distribution(
    env: EnvironmentWindow, start: int, n: int, cap: int = DP_CAP_DEFAULT
) -> QuenchedDistribution:
    if n > cap:
        raise DPCapExceeded(f"n={n} exceeds the DP cap {cap}; use Monte Carlo")
    env = env.covering(start - n, start + n)
    values = np.ascontiguousarray(env.slice_values(start - n, start + n))
    masses = kernels.dp_distribution(values, n, start, start - n)
    return QuenchedDistribution(n=n, start=start, masses=masses)


def _annealed_mean_task(alpha: AlphaLaw, n_grid: np.ndarray, seed: int, lo: int, hi: int):
    n_max = int(n_grid[-1])
    out = np.zeros((hi - lo, n_grid.size))
    for i in range(lo, hi):
        env_seed = derive_seed(seed, i, 0xE4B)
        env = EnvironmentWindow.sample(alpha, env_seed, -n_max, n_max)
        out[i - lo] = kernels.dp_mean_curve(env.values, -n_max, 0, n_grid)
    return out


def annealed_mean_curve(
    alpha: AlphaLaw,
    n_grid,
    env_samples: int,
    seed: int,
    workers: int | None = None,
    cap: int = DP_CAP_DEFAULT,
) -> tuple[np.ndarray, np.ndarray]:
    """(estimates, standard errors) of E[Z_n] over n_grid, exact DP per environment."""
    n_grid = np.asarray(sorted(set(int(n) for n in n_grid)), dtype=np.int64)
    if n_grid[-1] > cap:
        raise DPCapExceeded(f"n={n_grid[-1]} exceeds the DP cap {cap}")
    chunks = replica_chunks(env_samples, resolve_workers(workers), min_chunk=8)
    tasks = [(alpha, n_grid, seed, lo, hi) for lo, hi in chunks]
    parts = map_indexed(_annealed_mean_task, tasks, workers)
    means = np.concatenate(parts, axis=0)
    est = means.mean(axis=0)
    se = means.std(axis=0, ddof=1) / math.sqrt(env_samples) if env_samples > 1 else np.zeros_like(est)
    return est, se


def annealed_mean(
    alpha: AlphaLaw,
    n: int,
    env_samples: int,
    seed: int,
    workers: int | None = None,
    cap: int = DP_CAP_DEFAULT,
) -> tuple[float, float]:
    """Estimate of E[Z_n] with standard error (DP removes all walk-level noise)."""
    est, se = annealed_mean_curve(alpha, [n], env_samples, seed, workers, cap)
    return float(est[0]), float(se[0])


# ---------------------------------------------------------------------------
# hitting formulas


def hit_prob(env: EnvironmentWindow, x: int, a: int, b: int) -> float:
    """P(walk from x hits a before b), by the potential-sum ratio."""
    if not (a < x < b):
        raise ValueError(f"need a < x < b, got {a}, {x}, {b}")
    env = env.covering(a, b)
    from .environment import potential

    path = potential(env)
    u = path.slice_values(a, b - 1)
    u = u - u.max()  # shared denominator: shift-invariant
    expu = np.exp(u)
    return float(expu[x - a:].sum() / expu.sum())


def expected_hit_time_reflected(
    env: EnvironmentWindow, reflect_at: int, target: int, start: int
) -> float:
    """Expected time to reach ``target`` with a reflecting barrier at ``reflect_at``.

    Double-sum formula: sum over levels i in (start, target] of the expected
    traversal time of the edge (i-1, i), each expanded as
    sum_j (1/omega_{i-j-1}) prod_{k=1..j} rho_{i-k}, with the barrier site
    acting as omega = 1.
    """
    a, b = reflect_at, target
    if not (a < start < b):
        raise ValueError(f"need reflect_at < start < target, got {a}, {start}, {b}")
    env = env.covering(a, b)
    total = 0.0
    for i in range(start + 1, b + 1):
        prod = 1.0
        for j in range(0, i - a):
            site = i - j - 1
            inv_w = 1.0 if site == a else 1.0 / env.omega(site)
            total += inv_w * prod
            if site == a:
                break
            w = env.omega(site)
            prod *= (1.0 - w) / w
    return total


# ---------------------------------------------------------------------------
# leftmost record


@dataclass(frozen=True)
class LeftmostTailReport:
    horizon: int
    replicas: int
    tail_probs: np.ndarray    # P(W <= -m) for m = 1..m_max
    tail_ses: np.ndarray
    mean_neg_w: float
    mean_neg_w_se: float
    fit_exponent: float       # slope of log P(W <= -m) vs m (over positive counts)
    fit_r2: float
    diverging: bool
    bias_note: str


def leftmost_record_tail(
    alpha: AlphaLaw,
    m_max: int,
    replicas: int,
    seed: int,
    n_cap: int | None = None,
    workers: int | None = None,
) -> LeftmostTailReport:
    """Monte Carlo tail of the leftmost record W = inf_n Z_n (annealed).

    Right-transient laws only; the finite horizon truncates excursions, so the
    tail (and E[-W]) are biased downward - stated in the report.
    """
    if classify(alpha) is not Regime.RIGHT_TRANSIENT:
        return LeftmostTailReport(
            horizon=0,
            replicas=0,
            tail_probs=np.zeros(m_max),
            tail_ses=np.zeros(m_max),
            mean_neg_w=math.inf,
            mean_neg_w_se=math.nan,
            fit_exponent=math.nan,
            fit_r2=math.nan,
            diverging=True,
            bias_note="law is not right-transient: W = -inf almost surely",
        )
    if n_cap is None:
        r = alpha.rho_mean
        rough = r / (1.0 - r) if r < 1.0 else 10.0 * m_max
        n_cap = int(100 * max(1.0, rough))
    omegas = np.ascontiguousarray(alpha.omegas)
    cumw = np.cumsum(alpha.weights)
    cumw[-1] = 1.0 + 1e-15
    chunks = replica_chunks(replicas, resolve_workers(workers), min_chunk=16)
    tasks = [(_u64(seed), lo, hi, n_cap, omegas, cumw) for lo, hi in chunks]
    parts = map_indexed(kernels.leftmost_batch, tasks, workers)
    lows = np.concatenate(parts)
    ms = np.arange(1, m_max + 1)
    counts = np.array([(lows <= -m).sum() for m in ms], dtype=np.float64)
    probs = counts / replicas
    ses = np.sqrt(np.maximum(probs * (1.0 - probs), 0.0) / replicas)
    neg_w = -lows.astype(np.float64)
    mean_neg_w = float(neg_w.mean())
    mean_se = float(neg_w.std(ddof=1) / math.sqrt(replicas))
    mask = counts > 0
    if mask.sum() >= 2:
        y = np.log(probs[mask])
        xm = ms[mask].astype(np.float64)
        slope, intercept = np.polyfit(xm, y, 1)
        resid = y - (slope * xm + intercept)
        ss_tot = ((y - y.mean()) ** 2).sum()
        r2 = 1.0 - float((resid**2).sum() / ss_tot) if ss_tot > 0 else 1.0
    else:
        slope, r2 = math.nan, math.nan
    return LeftmostTailReport(
        horizon=n_cap,
        replicas=replicas,
        tail_probs=probs,
        tail_ses=ses,
        mean_neg_w=mean_neg_w,
        mean_neg_w_se=mean_se,
        fit_exponent=float(slope),
        fit_r2=float(r2),
        diverging=False,
        bias_note=(
            f"records beyond horizon {n_cap} are missed: tail probabilities "
            "and E[-W] are underestimates"
        ),
    )


def mc_hit_frequencies(
    env: EnvironmentWindow,
    x: int,
    a: int,
    b: int,
    replicas: int,
    seed: int,
    workers: int | None = None,
    t_max: int = 10**9,
) -> float:
    """Empirical frequency of hitting a before b from x."""
    env = env.covering(a, b)
    values = np.ascontiguousarray(env.slice_values(a, b))
    chunks = replica_chunks(replicas, resolve_workers(workers), min_chunk=64)
    tasks = [(_u64(seed), lo, hi, values, a, x, a, b, t_max) for lo, hi in chunks]
    parts = map_indexed(kernels.hit_batch, tasks, workers)
    hits = np.concatenate(parts)
    if np.any((hits != a) & (hits != b)):
        raise RuntimeError("a hitting walk exhausted its step bound")
    return float((hits == a).mean())
