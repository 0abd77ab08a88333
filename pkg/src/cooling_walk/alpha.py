"""Environment marginals: finite discrete laws on (0,1) and the moment
functionals that classify the walk (recurrence/transience, speed, s-index).

Only finite support is implemented; every law used in practice here is
two-point.  All operations are pure and all types immutable.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

#: classification tolerance on <log rho> at the recurrence boundary
EPS_CLASSIFY = 1e-12

_BISECT_MAX_ITER = 200


class Regime(enum.Enum):
    RECURRENT = "recurrent"
    RIGHT_TRANSIENT = "right_transient"
    LEFT_TRANSIENT = "left_transient"


class AlphaLawError(ValueError):
    pass


class NoRootError(AlphaLawError):
    pass


class ConvergenceError(AlphaLawError):
    pass


@dataclass(frozen=True)
class AlphaLaw:
    """Finite discrete law for the site probability omega, atoms sorted by omega.

    Duplicate omegas are merged at construction so the atom count reflects the
    support size; the non-degeneracy flag is simply ``count >= 2``.
    """

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        merged: dict[float, float] = {}
        for omega, weight in self.atoms:
            if not (0.0 < omega < 1.0):
                raise AlphaLawError(f"atom omega={omega} outside (0,1)")
            if weight <= 0.0:
                raise AlphaLawError(f"atom weight {weight} must be positive")
            merged[omega] = merged.get(omega, 0.0) + weight
        total = sum(merged.values())
        if abs(total - 1.0) > 1e-12:
            raise AlphaLawError(f"weights sum to {total}, not 1")
        object.__setattr__(
            self, "atoms", tuple(sorted((o, w) for o, w in merged.items()))
        )

    @classmethod
    def of(cls, *atoms: tuple[float, float]) -> "AlphaLaw":
        return cls(atoms=tuple(atoms))

    @classmethod
    def point(cls, omega: float) -> "AlphaLaw":
        return cls(atoms=((omega, 1.0),))

    @property
    def omegas(self) -> np.ndarray:
        return np.array([o for o, _ in self.atoms])

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])

    @property
    def rhos(self) -> np.ndarray:
        om = self.omegas
        return (1.0 - om) / om

    @property
    def ellipticity(self) -> float:
        om = self.omegas
        return min(om.min(), 1.0 - om.max())

    @property
    def non_degenerate(self) -> bool:
        return len(self.atoms) >= 2

    # moment functionals --------------------------------------------------
    @property
    def omega_mean(self) -> float:
        return float(self.weights @ self.omegas)

    @property
    def inv_omega_mean(self) -> float:
        return float(self.weights @ (1.0 / self.omegas))

    @property
    def rho_mean(self) -> float:
        return float(self.weights @ self.rhos)

    @property
    def log_rho_mean(self) -> float:
        return float(self.weights @ np.log(self.rhos))

    @property
    def sigma0_sq(self) -> float:
        return float(self.weights @ np.log(self.rhos) ** 2)

    def reflected(self) -> "AlphaLaw":
        """The law of 1 - omega; swaps left- and right-transience."""
        return AlphaLaw(atoms=tuple((1.0 - o, w) for o, w in self.atoms))

    def symmetric(self) -> bool:
        return self.atoms == self.reflected().atoms

    def serialize(self) -> str:
        inner = ",".join(f"({o!r},{w!r})" for o, w in self.atoms)
        return f"atoms=[{inner}]"


def rho_moment(alpha: AlphaLaw, s: float) -> float:
    """<rho^s> as an exact finite weighted sum (log-space for large s)."""
    if not math.isfinite(s):
        raise AlphaLawError("s must be finite")
    log_terms = np.log(alpha.weights) + s * np.log(alpha.rhos)
    m = log_terms.max()
    return float(math.exp(m) * np.exp(log_terms - m).sum())


def classify(alpha: AlphaLaw, eps: float = EPS_CLASSIFY) -> Regime:
    m = alpha.log_rho_mean
    if abs(m) <= eps:
        return Regime.RECURRENT
    return Regime.RIGHT_TRANSIENT if m < 0 else Regime.LEFT_TRANSIENT


def speed(alpha: AlphaLaw) -> float:
    """Asymptotic speed v of Z_n/n; signed (negative for left-transient laws)."""
    regime = classify(alpha)
    if regime is Regime.RECURRENT:
        return 0.0
    if regime is Regime.LEFT_TRANSIENT:
        return -speed(alpha.reflected())
    r = alpha.rho_mean
    if r >= 1.0:
        return 0.0
    return (1.0 - r) / (1.0 + r)


def solve_eta_recurrent(x: float) -> float:
    """The eta with x*delta_x + (1-x)*delta_eta recurrent (<log rho> = 0).

    Closed form: log((1-eta)/eta) = -x/(1-x) * log((1-x)/x).
    """
    if not (0.0 < x < 1.0):
        raise NoRootError(f"x={x} outside (0,1)")
    target = -x / (1.0 - x) * math.log((1.0 - x) / x)
    eta = 1.0 / (1.0 + math.exp(target))
    assert 0.0 < eta < 1.0
    return eta


def solve_eta_s_transient(x: float, s: float) -> float:
    """The eta making x*delta_x + (1-x)*delta_eta s-transient (<rho^s> = 1)."""
    if not (0.0 < x < 1.0):
        raise NoRootError(f"x={x} outside (0,1)")
    if s <= 0:
        raise NoRootError("s must be positive")
    head = x * ((1.0 - x) / x) ** s
    if head >= 1.0:
        raise NoRootError(
            f"x((1-x)/x)^s = {head} >= 1: no eta in (0,1) solves <rho^s> = 1"
        )
    r = ((1.0 - head) / (1.0 - x)) ** (1.0 / s)
    return 1.0 / (1.0 + r)


def recurrent_two_point(x: float) -> AlphaLaw:
    """alpha_x = x*delta_x + (1-x)*delta_eta(x), recurrent by construction."""
    return AlphaLaw.of((x, x), (solve_eta_recurrent(x), 1.0 - x))


def s_transient_two_point(x: float, s: float) -> AlphaLaw:
    return AlphaLaw.of((x, x), (solve_eta_s_transient(x, s), 1.0 - x))


def transience_index(alpha: AlphaLaw, tol: float = 1e-10) -> Optional[float]:
    """The unique s > 0 with <rho^s> = 1, when it exists.

    Returns None for recurrent (and left-transient) laws, and math.inf when
    all rho <= 1 (no root; the walk is ballistic with exponential left tail).
    """
    if classify(alpha) is not Regime.RIGHT_TRANSIENT:
        return None
    if alpha.rhos.max() <= 1.0:
        return math.inf

    def f(s: float) -> float:
        return rho_moment(alpha, s) - 1.0

    lo, hi = 0.0, 1.0
    for _ in range(_BISECT_MAX_ITER):
        if f(hi) > 0.0:
            break
        lo = hi
        hi *= 2.0
    else:
        raise ConvergenceError("bracket expansion failed for transience index")
    for _ in range(_BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= tol * max(1.0, hi):
            s = 0.5 * (lo + hi)
            if abs(f(s)) > 1e-8:
                raise ConvergenceError("transience index residual too large")
            return s
    raise ConvergenceError("bisection did not converge for transience index")


@dataclass(frozen=True)
class MomentReport:
    """Classification summary of an environment law."""

    log_rho_mean: float
    sigma0_sq: float
    rho_mean: float
    regime: Regime
    speed: float
    s_index: Optional[float]

    def as_dict(self) -> dict:
        s = self.s_index
        return {
            "log_rho_mean": self.log_rho_mean,
            "sigma0_sq": self.sigma0_sq,
            "rho_mean": self.rho_mean,
            "regime": self.regime.value,
            "speed": self.speed,
            "s_index": ("infinite" if s == math.inf else s),
        }


def moment_report(alpha: AlphaLaw) -> MomentReport:
    return MomentReport(
        log_rho_mean=alpha.log_rho_mean,
        sigma0_sq=alpha.sigma0_sq,
        rho_mean=alpha.rho_mean,
        regime=classify(alpha),
        speed=speed(alpha),
        s_index=transience_index(alpha),
    )
