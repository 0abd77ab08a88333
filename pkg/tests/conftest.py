"""Shared oracles for the test suite.

These deliberately re-derive quantities by routes independent of the library
(linear solves, brute-force enumeration, quadrature), so formula
implementations are checked against something they do not share code with.
"""

from __future__ import annotations

import numpy as np
import pytest

from cooling_walk.environment import EnvironmentWindow


def hit_prob_oracle(env: EnvironmentWindow, x: int, a: int, b: int) -> float:
    """P(hit a before b) by solving the harmonic system directly."""
    size = b - a + 1
    mat = np.zeros((size, size))
    rhs = np.zeros(size)
    mat[0, 0] = 1.0
    rhs[0] = 1.0
    mat[-1, -1] = 1.0
    for s in range(a + 1, b):
        i = s - a
        w = env.omega(s)
        mat[i, i] = 1.0
        mat[i, i + 1] = -w
        mat[i, i - 1] = -(1.0 - w)
    return float(np.linalg.solve(mat, rhs)[x - a])


def reflected_time_oracle(env: EnvironmentWindow, a: int, b: int, start: int) -> float:
    """Expected hitting time of b with reflection at a, by linear solve."""
    size = b - a + 1
    mat = np.zeros((size, size))
    rhs = np.ones(size)
    mat[-1, -1] = 1.0
    rhs[-1] = 0.0
    mat[0, 0] = 1.0
    mat[0, 1] = -1.0  # from the barrier the walk steps right surely
    for s in range(a + 1, b):
        i = s - a
        w = env.omega(s)
        mat[i, i] = 1.0
        mat[i, i + 1] = -w
        mat[i, i - 1] = -(1.0 - w)
    return float(np.linalg.solve(mat, rhs)[start - a])


def brute_force_smallest_valley(u: np.ndarray, left: int, threshold: float):
    """Exhaustive scan over all triples a <= 0 <= c; returns (a, b, c) or None.

    Minimal width wins; ties prefer smaller c; b is the leftmost argmin.
    """
    right = left + len(u) - 1
    best = None
    for width in range(1, right - left + 1):
        for c in range(max(0, width + left), min(right, width) + 1):
            a = c - width
            seg = u[a - left: c - left + 1]
            depth = min(u[a - left], u[c - left]) - seg.min()
            if depth > threshold:
                b = a + int(np.argmin(seg))
                best = (a, b, c)
                break
        if best:
            return best
    return None


@pytest.fixture
def two_point_alpha():
    from cooling_walk import AlphaLaw

    return AlphaLaw.of((0.3, 0.45), (0.72, 0.55))
