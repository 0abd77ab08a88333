"""Numerics for the symmetric localization limit law and its weighted mixtures.

The base density is the alternating series

    v(x) = (2/pi) * sum_k (-1)^k/(2k+1) * exp(-(2k+1)^2 pi^2 |x| / 8),

evaluated with a certified remainder bound away from the origin and an Euler
transform near it (the raw series degenerates to a Leibniz-type sum at 0).
All derived quantities (CDF, quantiles, variance, MGF, characteristic
function) come from term-wise closed forms of the same series.  Mixtures
sum independent standardized copies with an optional Gaussian remainder;
their densities are recovered from the product characteristic function by
FFT inversion.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .rng import derive_seed, stream_uniforms

#: decay rate of the leading tail term: a_k = (2k+1)^2 * A0
A0 = math.pi**2 / 8.0

#: |x| below which the alternating series needs Euler acceleration
EULER_SWITCH = 0.05

DEFAULT_TOL = 1e-12

#: hard cap on explicit mixture entries
MAX_MIXTURE_ENTRIES = 64

#: l2 tail mass below which trailing mixture entries fold into the Gaussian
FOLD_TAIL_L2 = 1e-4

_FFT_POINTS = 1 << 16
_FFT_SD_SPAN = 12.0


class MgfDomainError(ValueError):
    pass


class GridTooNarrowError(ValueError):
    def __init__(self, message: str, suggested_half_width: float):
        super().__init__(message)
        self.suggested_half_width = suggested_half_width


def _a(k: np.ndarray | int):
    return (2 * np.asarray(k, dtype=np.float64) + 1) ** 2 * A0


def _euler_alternating(terms: np.ndarray, tol: float) -> np.ndarray:
    """Euler transform of sum_k (-1)^k terms[..., k] (terms positive, smooth)."""
    diffs = terms.astype(np.float64)
    total = np.zeros(terms.shape[:-1])
    factor = 0.5
    sign = 1.0
    for j in range(terms.shape[-1]):
        contrib = sign * factor * diffs[..., 0]
        total += contrib
        if j > 4 and np.max(np.abs(contrib)) < 0.25 * tol:
            break
        diffs = diffs[..., 1:] - diffs[..., :-1]
        factor *= 0.5
        sign = -sign
        if diffs.shape[-1] == 0:
            break
    return total


def _plain_terms_needed(x_min: float, power: int, tol: float) -> int:
    k = 0
    while True:
        bound = math.exp(-_a(k) * x_min) / (2 * k + 1) ** power
        if bound < tol:
            return max(k, 1)
        k += 1
        if k > 400:
            return 400


def density(x, tol: float = DEFAULT_TOL) -> np.ndarray | float:
    """The limit-law density v(x); error below ``tol`` everywhere."""
    xa = np.abs(np.asarray(x, dtype=np.float64))
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    out = np.empty_like(xa)
    near = xa < EULER_SWITCH
    if np.any(near):
        ks = np.arange(64)
        terms = np.exp(-np.outer(xa[near], _a(ks))) / (2 * ks + 1)
        out[near] = _euler_alternating(terms, tol)
    if np.any(~near):
        xs = xa[~near]
        kmax = _plain_terms_needed(float(xs.min()), 1, tol)
        ks = np.arange(kmax + 1)
        signs = np.where(ks % 2 == 0, 1.0, -1.0)
        terms = np.exp(-np.outer(xs, _a(ks))) * (signs / (2 * ks + 1))
        out[~near] = terms.sum(axis=1)
    out *= 2.0 / math.pi
    np.maximum(out, 0.0, out=out)
    return float(out[0]) if scalar else out


def cdf(x, tol: float = DEFAULT_TOL) -> np.ndarray | float:
    """CDF by term-wise integration: F(x) = 1 - (16/pi^3) S(|x|) for x >= 0,

    with S(y) = sum_k (-1)^k exp(-a_k y)/(2k+1)^3, and F(-x) = 1 - F(x).
    """
    xv = np.asarray(x, dtype=np.float64)
    scalar = xv.ndim == 0
    xv = np.atleast_1d(xv)
    xa = np.abs(xv)
    s = np.empty_like(xa)
    near = xa < EULER_SWITCH
    if np.any(near):
        ks = np.arange(64)
        terms = np.exp(-np.outer(xa[near], _a(ks))) / (2 * ks + 1) ** 3
        s[near] = _euler_alternating(terms, tol)
    if np.any(~near):
        xs = xa[~near]
        kmax = _plain_terms_needed(float(xs.min()), 3, tol)
        ks = np.arange(kmax + 1)
        signs = np.where(ks % 2 == 0, 1.0, -1.0)
        terms = np.exp(-np.outer(xs, _a(ks))) * (signs / (2 * ks + 1) ** 3)
        s[~near] = terms.sum(axis=1)
    upper = 1.0 - (16.0 / math.pi**3) * s
    out = np.where(xv >= 0, upper, 1.0 - upper)
    np.clip(out, 0.0, 1.0, out=out)
    return float(out[0]) if scalar else out


def quantile(u, tol: float = DEFAULT_TOL, max_iter: int = 200):
    """Inverse CDF by bisection to ``tol`` (kept independent of the sampler)."""
    uv = np.asarray(u, dtype=np.float64)
    scalar = uv.ndim == 0
    uv = np.atleast_1d(uv)
    if np.any((uv <= 0.0) | (uv >= 1.0)):
        raise ValueError("quantile argument must lie in (0,1)")
    lo = np.full_like(uv, -60.0)
    hi = np.full_like(uv, 60.0)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        too_low = cdf(mid) < uv
        lo = np.where(too_low, mid, lo)
        hi = np.where(too_low, hi, mid)
        if np.max(hi - lo) <= tol:
            break
    out = 0.5 * (lo + hi)
    return float(out[0]) if scalar else out


@functools.lru_cache(maxsize=1)
def variance() -> float:
    """sigma_V^2 = (4096/pi^7) sum_k (-1)^k/(2k+1)^7 (single cached definition)."""
    ks = np.arange(64)
    signs = np.where(ks % 2 == 0, 1.0, -1.0)
    return float(4096.0 / math.pi**7 * (signs / (2 * ks + 1) ** 7).sum())


def sigma_v() -> float:
    return math.sqrt(variance())


MGF_RADIUS = A0  # |t| < pi^2/8 for the unstandardized variable


def mgf(t: float, tol: float = DEFAULT_TOL) -> float:
    """E[exp(tV)] = (2/pi) sum_k (-1)^k/(2k+1) * 2 a_k/(a_k^2 - t^2)."""
    if abs(t) >= MGF_RADIUS:
        raise MgfDomainError(f"|t|={abs(t)} outside the divergence radius pi^2/8={MGF_RADIUS}")
    kmax = 6000  # remainder ~ (32/pi^3)/(2k+1)^3 < 1e-12
    ks = np.arange(kmax, dtype=np.float64)
    a = _a(ks)
    signs = np.where(ks % 2 == 0, 1.0, -1.0)
    terms = signs / (2 * ks + 1) * 2.0 * a / (a * a - t * t)
    return float(2.0 / math.pi * terms.sum())


def charfn_series(t, kmax: int = 200_000):
    """E[exp(itV)] by the raw term-wise sum; the independent cross-check of
    the closed form below (slow: the tail cancels like 1/k^3)."""
    tv = np.atleast_1d(np.asarray(t, dtype=np.float64))
    out = np.zeros_like(tv)
    block = 4096
    for k0 in range(0, kmax, block):
        ks = np.arange(k0, min(k0 + block, kmax), dtype=np.float64)
        a = _a(ks)
        signs = np.where(ks % 2 == 0, 1.0, -1.0)
        coeff = signs / (2 * ks + 1) * 2.0 * a
        out += (coeff[None, :] / (a[None, :] ** 2 + tv[:, None] ** 2)).sum(axis=1)
    out *= 2.0 / math.pi
    return float(out[0]) if np.asarray(t).ndim == 0 else out


def charfn(t):
    """E[exp(itV)], real by symmetry; valid for all real t.

    Closed form [sec(z) - sech(z)]/(2it) with z = (pi/2) sqrt(it/A0), obtained
    by partial fractions and sum_k (-1)^k (2k+1)/((2k+1)^2 + a^2) =
    (pi/4) sech(pi a/2); agrees with the raw series to machine precision.
    """
    tv = np.atleast_1d(np.asarray(t, dtype=np.float64))
    out = np.ones_like(tv)
    nz = np.abs(tv) > 1e-8
    if np.any(nz):
        ts = tv[nz]
        z = (math.pi / 2.0) * np.sqrt(1j * ts / A0)
        big = np.maximum(np.abs(z.real), np.abs(z.imag)) > 350.0
        zs = np.where(big, 1.0 + 0j, z)
        with np.errstate(over="ignore", invalid="ignore"):
            vals = (1.0 / np.cos(zs) - 1.0 / np.cosh(zs)) / (2j * ts)
        res = np.where(big, 0.0, vals.real)
        out[nz] = res
    small = ~nz
    if np.any(small):
        out[small] = 1.0 - 0.5 * variance() * tv[small] ** 2
    return float(out[0]) if np.asarray(t).ndim == 0 else out


def kesten_eval(mode: str, argument: float = 0.0):
    """Dispatcher used by the CLI: density/cdf/quantile/variance/mgf/charfn."""
    if mode == "density":
        return density(argument)
    if mode == "cdf":
        return cdf(argument)
    if mode == "quantile":
        return quantile(argument)
    if mode == "variance":
        return variance()
    if mode == "mgf":
        return mgf(argument)
    if mode == "charfn":
        return charfn(argument)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# sampling


@functools.lru_cache(maxsize=1)
def _quantile_table() -> PchipInterpolator:
    xs = np.arange(-16.0, 16.0 + 1e-9, 1.0 / 512.0)
    fs = np.maximum.accumulate(cdf(xs))
    keep = np.concatenate(([True], np.diff(fs) > 0))
    return PchipInterpolator(fs[keep], xs[keep], extrapolate=False)


_TAIL_COEFF = 16.0 / math.pi**3


def _inverse(u: np.ndarray) -> np.ndarray:
    """Inverse CDF for bulk sampling: monotone table inside +-16, exact
    one-term tail inversion outside (next term is below double precision)."""
    table = _quantile_table()
    lo_u, hi_u = float(table.x[0]), float(table.x[-1])
    out = np.empty_like(u)
    low = u < lo_u
    high = u > hi_u
    mid = ~(low | high)
    out[mid] = table(u[mid])
    if low.any():
        out[low] = -np.log(_TAIL_COEFF / u[low]) / A0
    if high.any():
        out[high] = np.log(_TAIL_COEFF / (1.0 - u[high])) / A0
    return out


def sample(seed: int, count: int, stream: int = 0) -> np.ndarray:
    """i.i.d. draws of the base law via inverse CDF; value i depends only on
    (seed, stream, i)."""
    u = stream_uniforms(derive_seed(seed, stream, 0x5E57), 0, count)
    u = np.clip(u, 1e-300, 1.0 - 1e-16)
    return _inverse(u)


# ---------------------------------------------------------------------------
# mixtures


@dataclass(frozen=True)
class MixtureWeights:
    """Nonnegative weights with squared sum <= 1 (entry 0 = boundary slot)."""

    entries: tuple[float, ...]

    def __post_init__(self):
        if len(self.entries) > MAX_MIXTURE_ENTRIES:
            raise ValueError(
                f"{len(self.entries)} mixture entries exceed the cap "
                f"{MAX_MIXTURE_ENTRIES}; fold the tail explicitly"
            )
        arr = np.asarray(self.entries, dtype=np.float64)
        if np.any(arr < 0):
            raise ValueError("mixture weights must be nonnegative")
        if arr.size and float((arr**2).sum()) > 1.0 + 1e-12:
            raise ValueError(f"squared norm {float((arr ** 2).sum())} exceeds 1")
        object.__setattr__(self, "entries", tuple(float(v) for v in arr))

    @classmethod
    def of(cls, values: Iterable[float]) -> "MixtureWeights":
        return cls(entries=tuple(values))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=np.float64)

    @property
    def norm_sq(self) -> float:
        return float((self.array**2).sum())

    def gaussian_remainder(self) -> float:
        """a(lambda) = sqrt(max(0, 1 - ||lambda||^2))."""
        return math.sqrt(max(0.0, 1.0 - self.norm_sq))

    def sorted_desc(self) -> "MixtureWeights":
        """The canonical reordering: entries decreasing."""
        return MixtureWeights(entries=tuple(sorted(self.entries, reverse=True)))

    def zero_pinned_sorted(self) -> "MixtureWeights":
        """Entry 0 kept first (boundary), remaining entries decreasing."""
        if not self.entries:
            return self
        rest = sorted(self.entries[1:], reverse=True)
        return MixtureWeights(entries=(self.entries[0], *rest))

    def max_entry(self) -> float:
        return max(self.entries) if self.entries else 0.0

    def nonzero_sorted(self) -> np.ndarray:
        arr = self.array
        return np.sort(arr[arr > 0.0])[::-1]


def canonicalize(weights: MixtureWeights) -> MixtureWeights:
    return weights.sorted_desc()


def mixtures_equal_in_law(a: MixtureWeights, b: MixtureWeights, tol: float = 1e-12) -> bool:
    """Equality in law holds iff the sorted nonzero entries match entrywise."""
    xa, xb = a.nonzero_sorted(), b.nonzero_sorted()
    if xa.size != xb.size:
        return False
    return bool(np.all(np.abs(xa - xb) <= tol))


def lambda_q(q: float, truncation: Optional[int] = None) -> MixtureWeights:
    """Geometric mixture weights: entry 0 = 0, entry j has square q^2(1-q^2)^(j-1)."""
    if not (0.0 < q <= 1.0):
        raise ValueError("q must lie in (0,1]")
    if q == 1.0:
        return MixtureWeights(entries=(0.0, 1.0))
    if truncation is None:
        truncation = max(1, math.ceil(math.log(1e-12) / math.log(1.0 - q * q)))
        truncation = min(truncation, MAX_MIXTURE_ENTRIES - 1)
    sq = q * q * (1.0 - q * q) ** np.arange(truncation, dtype=np.float64)
    return MixtureWeights(entries=(0.0, *np.sqrt(sq)))


def q_from_c(c: float) -> float:
    """q_c = sqrt((e^{4c}-1)/e^{4c}) for double-exponential cooling rate c."""
    if c <= 0:
        raise ValueError("c must be positive")
    return math.sqrt(-math.expm1(-4.0 * c))


class MixtureLaw:
    """law of sum_j lambda(j) * (V_j / sigma_V) (+ a(lambda) * Phi when flagged).

    Sampling draws each component by inverse CDF; the density comes from the
    product characteristic function on a uniform frequency grid inverted by
    FFT.  Entries whose collective l2 mass is below FOLD_TAIL_L2 are folded
    into the Gaussian part by matching second moment.
    """

    def __init__(self, weights: MixtureWeights, include_gaussian: bool = True):
        self.weights = weights
        self.include_gaussian = include_gaussian
        arr = weights.array
        nz = np.sort(arr[arr > 0.0])  # ascending
        gaussian_var = weights.gaussian_remainder() ** 2 if include_gaussian else 0.0
        folded = 0.0
        keep = nz
        if nz.size:
            cum = np.cumsum(nz**2)
            fold_count = int(np.searchsorted(cum, FOLD_TAIL_L2, side="right"))
            if 0 < fold_count < nz.size:
                folded = float(cum[fold_count - 1])
                keep = nz[fold_count:]
        self._components = keep[::-1].copy()  # descending
        self._gaussian_var = gaussian_var + folded
        self._grid_cache: Optional[tuple[np.ndarray, np.ndarray, np.ndarray]] = None

    @property
    def total_variance(self) -> float:
        return float((self._components**2).sum() + self._gaussian_var)

    @property
    def sd(self) -> float:
        return math.sqrt(max(self.total_variance, 1e-300))

    def sample(self, seed: int, count: int) -> np.ndarray:
        sv = sigma_v()
        out = np.zeros(count)
        arr = self.weights.array
        for j in np.flatnonzero(arr > 0.0):
            out += arr[j] / sv * sample(seed, count, stream=j + 1)
        if self.include_gaussian:
            a = self.weights.gaussian_remainder()
            if a > 0.0:
                from scipy.special import ndtri

                u = stream_uniforms(derive_seed(seed, 0xF0, 0x6A55), 0, count)
                out += a * ndtri(np.clip(u, 1e-300, 1 - 1e-16))
        return out

    def charfn(self, t: np.ndarray) -> np.ndarray:
        sv = sigma_v()
        out = np.exp(-0.5 * self._gaussian_var * np.asarray(t, dtype=np.float64) ** 2)
        for lam in self._components:
            out = out * charfn(lam * t / sv)
        return out

    def mgf_radius(self) -> float:
        top = self.weights.max_entry()
        if top == 0.0:
            return math.inf
        return math.pi**2 * sigma_v() / (8.0 * top)

    def mgf(self, t: float) -> float:
        """Exact product MGF (no tail folding on this path)."""
        if abs(t) >= self.mgf_radius():
            raise MgfDomainError(f"|t|={abs(t)} outside mixture radius {self.mgf_radius()}")
        out = 1.0
        if self.include_gaussian:
            a = self.weights.gaussian_remainder()
            out = math.exp(0.5 * a * a * t * t)
        sv = sigma_v()
        arr = self.weights.array
        for lam in arr[arr > 0.0]:
            out *= mgf(lam * t / sv)
        return out

    def _density_grid(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self._grid_cache is None:
            sd = self.sd
            half = _FFT_SD_SPAN * sd
            n = _FFT_POINTS
            dx = 2.0 * half / n
            dt = 2.0 * math.pi / (n * dx)
            t0 = -0.5 * n * dt
            t = t0 + dt * np.arange(n)
            psi = self.charfn(t)
            xs = np.fft.fftfreq(n) * 2.0 * math.pi / dt
            vals = np.fft.fft(psi) * (dt * np.exp(1j * xs * t0) / (2.0 * math.pi))
            order = np.argsort(xs)
            xs = xs[order]
            dens = np.maximum(vals.real[order], 0.0)
            cdf_grid = np.concatenate(([0.0], np.cumsum((dens[1:] + dens[:-1]) * 0.5 * np.diff(xs))))
            total = cdf_grid[-1]
            if total > 0:
                cdf_grid /= total
            self._grid_cache = (xs, dens, cdf_grid)
        return self._grid_cache

    def tail_mass_beyond(self, half_width: float) -> float:
        """Exponential-tail estimate of P(|X| > half_width)."""
        comps = self._components
        sv = sigma_v()
        if comps.size == 0:
            z = half_width / math.sqrt(max(self._gaussian_var, 1e-300))
            return float(math.erfc(z / math.sqrt(2.0)))
        lam = float(comps.max())
        rate = A0 * sv / lam  # tail rate of the widest component
        return float(2.0 * _TAIL_COEFF * math.exp(-rate * half_width * 0.9))

    def density_on_grid(self, grid: np.ndarray, tail_tol: float = 1e-6) -> np.ndarray:
        grid = np.asarray(grid, dtype=np.float64)
        half = float(np.abs(grid).max())
        mass_out = self.tail_mass_beyond(half)
        if mass_out > tail_tol:
            needed = max(half, self.sd)
            while self.tail_mass_beyond(needed) > tail_tol:
                needed *= 1.5
            raise GridTooNarrowError(
                f"estimated tail mass {mass_out:.3e} beyond |x|={half}",
                suggested_half_width=needed,
            )
        xs, dens, _ = self._density_grid()
        return np.interp(grid, xs, dens)

    def cdf(self, x) -> np.ndarray:
        xs, _, cg = self._density_grid()
        return np.interp(np.asarray(x, dtype=np.float64), xs, cg, left=0.0, right=1.0)

    def default_grid(self) -> np.ndarray:
        xs, _, _ = self._density_grid()
        return xs
