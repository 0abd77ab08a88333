"""Quenched environments on integer windows, their potential paths, valley
decomposition, and the annealed/quenched series expressing 1/speed.

Site values are generated from a site-keyed hash of (seed, x), so extending a
window never changes previously materialized values, and disjoint windows can
be built concurrently from one seed without coordination.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .alpha import AlphaLaw
from .rng import site_uniforms


class EnvironmentError_(Exception):
    pass


class WindowExhausted(EnvironmentError_):
    """The window did not contain the requested structure; extend and retry."""

    def __init__(self, message: str, suggested_half_width: int):
        super().__init__(message)
        self.suggested_half_width = suggested_half_width


class DivergentSeriesError(EnvironmentError_):
    pass


def atom_indices_from_uniforms(alpha: AlphaLaw, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(alpha.weights)
    cum[-1] = 1.0 + 1e-15  # guard: u < 1 always lands in the last atom
    return np.searchsorted(cum, u, side="right")


@dataclass(frozen=True)
class EnvironmentWindow:
    """omega(x) for x in [left, right], materialized from (alpha, seed)."""

    alpha: AlphaLaw
    seed: int
    left: int
    right: int
    values: np.ndarray

    @classmethod
    def sample(cls, alpha: AlphaLaw, seed: int, left: int, right: int) -> "EnvironmentWindow":
        if not (left <= 0 <= right):
            raise EnvironmentError_("window must contain the origin")
        xs = np.arange(left, right + 1, dtype=np.int64)
        u = site_uniforms(seed, xs)
        values = alpha.omegas[atom_indices_from_uniforms(alpha, u)]
        values.flags.writeable = False
        return cls(alpha=alpha, seed=seed, left=left, right=right, values=values)

    def omega(self, x: int) -> float:
        if not (self.left <= x <= self.right):
            raise EnvironmentError_(f"site {x} outside window [{self.left},{self.right}]")
        return float(self.values[x - self.left])

    def slice_values(self, left: int, right: int) -> np.ndarray:
        if left < self.left or right > self.right:
            raise EnvironmentError_("requested slice exceeds the window")
        return self.values[left - self.left: right - self.left + 1]

    def extended(self, left: int, right: int) -> "EnvironmentWindow":
        """A wider window; overlapping sites keep their values (site-keyed hash)."""
        return EnvironmentWindow.sample(
            self.alpha, self.seed, min(left, self.left), max(right, self.right)
        )

    def covering(self, left: int, right: int) -> "EnvironmentWindow":
        if left >= self.left and right <= self.right:
            return self
        return self.extended(left, right)

    def dump_csv(self) -> str:
        """The reproducibility-audit dump format: one `x,omega` row per site."""
        buf = io.StringIO()
        buf.write("x,omega\n")
        for x in range(self.left, self.right + 1):
            buf.write(f"{x},{self.values[x - self.left]!r}\n")
        return buf.getvalue()


@dataclass(frozen=True)
class PotentialPath:
    """Cumulative log-odds path U(k): U(0)=0, U(k)-U(k-1)=log rho_k."""

    window: EnvironmentWindow
    values: np.ndarray  # U(k) for k in [window.left, window.right]

    @property
    def left(self) -> int:
        return self.window.left

    @property
    def right(self) -> int:
        return self.window.right

    def u(self, k: int) -> float:
        return float(self.values[k - self.left])

    def slice_values(self, left: int, right: int) -> np.ndarray:
        return self.values[left - self.left: right - self.left + 1]


def potential(env: EnvironmentWindow) -> PotentialPath:
    """U(k) = sum_{i=1..k} log rho_i for k>0, 0 at 0, -sum_{i=k+1..0} for k<0."""
    log_rho = np.log((1.0 - env.values) / env.values)
    u = np.empty(env.right - env.left + 1)
    origin = -env.left
    u[origin] = 0.0
    if env.right > 0:
        u[origin + 1:] = np.cumsum(log_rho[origin + 1:])
    if env.left < 0:
        # U(k) = -(log rho_{k+1} + ... + log rho_0) going left from 0
        u[:origin] = -np.cumsum(log_rho[1:origin + 1][::-1])[::-1]
    u.flags.writeable = False
    return PotentialPath(window=env, values=u)


@dataclass(frozen=True)
class Valley:
    """A triple a <= b <= c with b the bottom and min(U(a),U(c)) - U(b) the depth."""

    a: int
    b: int
    c: int
    depth: float


def smallest_valley(path: PotentialPath, depth_threshold: float, delta: float = 0.0) -> Valley:
    """The narrowest valley around the origin with depth > depth_threshold + delta.

    Scans widths in increasing order over all pairs a <= 0 <= c (ties: smaller
    c, then larger a); the bottom b is the leftmost argmin of U on [a, c].
    Raises WindowExhausted when no qualifying triple fits in the window.
    """
    threshold = depth_threshold + delta
    u = path.values
    left, right = path.left, path.right
    origin = -left
    if left > 0 or right < 0:
        raise EnvironmentError_("potential window must contain the origin")
    # prefix minima toward each side: min U on [a,0] and on [0,c]
    min_left = np.minimum.accumulate(u[origin::-1])[::-1]   # index a-left -> min on [a,0]
    min_right = np.minimum.accumulate(u[origin:])           # index c -> min on [0,c]
    max_width = right - left
    for width in range(1, max_width + 1):
        c_lo = max(0, width + left)
        c_hi = min(right, width)
        if c_lo > c_hi:
            continue
        cs = np.arange(c_lo, c_hi + 1)
        a_idx = cs - width - left
        inner = np.minimum(min_left[a_idx], min_right[cs])
        depth = np.minimum(u[a_idx], u[cs + origin]) - inner
        hits = np.flatnonzero(depth > threshold)
        if hits.size:
            c = int(cs[hits[0]])  # smallest c wins at this width
            a = c - width
            seg = u[a - left: c - left + 1]
            b = a + int(np.argmin(seg))
            return Valley(
                a=a, b=b, c=c,
                depth=float(min(u[a - left], u[c - left]) - float(seg.min())),
            )
    raise WindowExhausted(
        f"no valley of depth > {threshold} inside [{left},{right}]",
        suggested_half_width=2 * max(right, -left, 1),
    )


def smallest_valley_auto(
    alpha: AlphaLaw,
    seed: int,
    depth_threshold: float,
    delta: float = 0.0,
    initial_half_width: int = 64,
    max_half_width: int = 1 << 22,
) -> tuple[Valley, PotentialPath]:
    """smallest_valley with automatic window extension."""
    half = initial_half_width
    while True:
        env = EnvironmentWindow.sample(alpha, seed, -half, half)
        path = potential(env)
        try:
            return smallest_valley(path, depth_threshold, delta), path
        except WindowExhausted as exc:
            half = max(exc.suggested_half_width, 2 * half)
            if half > max_half_width:
                raise


# ---------------------------------------------------------------------------
# the series Sigma(omega) = sum_{i<=0} (1/omega_i) prod_{j=i+1..0} rho_j


def sigma_series_annealed(alpha: AlphaLaw) -> float:
    """E[Sigma(omega)] = <1/omega> / (1 - <rho>); equals 1/speed when <rho> < 1."""
    r = alpha.rho_mean
    if r >= 1.0:
        raise DivergentSeriesError(f"<rho> = {r} >= 1: annealed series diverges")
    return alpha.inv_omega_mean / (1.0 - r)


def sigma_series_quenched(
    env_or_alpha,
    seed: Optional[int] = None,
    tolerance: float = 1e-12,
    window_block: int = 4096,
    max_terms: int = 10**5,
) -> float:
    """Sigma(omega) on a quenched environment, truncated when certifiably small.

    Truncation: stop once the product of rho over the last 50 terms falls
    below tolerance * partial_sum (with the rigorous geometric tail bound
    applied whenever max rho < 1); flags non-decay after ``max_terms`` terms.
    """
    if isinstance(env_or_alpha, EnvironmentWindow):
        base_env = env_or_alpha
        alpha = base_env.alpha
        seed = base_env.seed
    else:
        alpha = env_or_alpha
        if seed is None:
            raise EnvironmentError_("quenched series needs a seed")
        base_env = EnvironmentWindow.sample(alpha, seed, -window_block, 0)
    rho_max = float(alpha.rhos.max())
    total = 0.0
    product = 1.0  # prod_{j=i+1..0} rho_j for the current i
    recent: list[float] = []
    env = base_env.covering(-window_block, 0)
    i = 0
    while True:
        if i < env.left:
            env = env.covering(env.left - window_block, 0)
        w = env.omega(i)
        total += product / w
        rho_i = (1.0 - w) / w
        # advance: the term at i-1 carries prod_{j=i..0}
        product *= rho_i
        recent.append(rho_i)
        if len(recent) > 50:
            recent.pop(0)
        if len(recent) == 50:
            if rho_max < 1.0:
                tail_bound = product / (1.0 - rho_max) / alpha.ellipticity
                if tail_bound < tolerance * max(total, 1.0):
                    return total
            if math.prod(recent) < tolerance * max(total, 1.0) and product < tolerance * max(total, 1.0):
                return total
        i -= 1
        if -i > max_terms:
            raise DivergentSeriesError(
                f"partial products failed to decay after {max_terms} terms"
            )
