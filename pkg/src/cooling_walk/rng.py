"""Counter-based 64-bit mixing primitives shared by every stochastic component.

The whole library derives its randomness from one primitive, ``mix64`` (the
SplitMix64 output function applied to ``state + GAMMA``).  Three derived
conventions are part of the external reproducibility contract:

* stream seeds:   ``derive_seed(master, stream, substream)``
* step uniforms:  step ``i`` of stream ``s`` is ``unit64(mix64(s + i*GAMMA))``
* site values:    site ``x`` of environment ``e`` is ``unit64(mix64(e ^ (x*GAMMA)))``

Everything is pure integer arithmetic mod 2**64, so results are identical
across processes, worker counts and platforms.  The numba kernels re-implement
the same formulas; ``tests/test_stats.py`` pins the cross-implementation
equality.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GAMMA = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB

# a 53-bit mantissa step; unit64(w) = (w >> 11) * 2**-53 lies in [0, 1)
_INV53 = 1.0 / 9007199254740992.0


def mix64(z: int) -> int:
    """SplitMix64 step: add the golden gamma, then finalize (Stafford mix)."""
    z = (z + GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, stream: int, substream: int) -> int:
    """Derive a 64-bit seed from (master, stream, substream), order-sensitive."""
    h = mix64(int(master) & MASK64)
    h = mix64(h ^ (int(stream) & MASK64))
    return mix64(h ^ (int(substream) & MASK64))


def unit64(word: int) -> float:
    """Map a 64-bit word to a double in [0, 1) using the top 53 bits."""
    return (word >> 11) * _INV53


def site_uniform(env_seed: int, x: int) -> float:
    """Uniform attached to integer site ``x`` of the environment ``env_seed``."""
    return unit64(mix64(env_seed ^ ((x * GAMMA) & MASK64)))


def stream_uniform(stream_seed: int, i: int) -> float:
    """The ``i``-th uniform of the counter-based stream ``stream_seed``."""
    return unit64(mix64((stream_seed + i * GAMMA) & MASK64))


# ---------------------------------------------------------------------------
# vectorized twins (numpy uint64 arithmetic wraps mod 2**64, like the above)

_U64_GAMMA = np.uint64(GAMMA)
_U64_A = np.uint64(_MIX_A)
_U64_B = np.uint64(_MIX_B)


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z + _U64_GAMMA).astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _U64_A
    z = (z ^ (z >> np.uint64(27))) * _U64_B
    return z ^ (z >> np.uint64(31))


def site_uniforms(env_seed: int, xs: np.ndarray) -> np.ndarray:
    """Vectorized ``site_uniform`` over an array of integer sites."""
    keys = np.asarray(xs, dtype=np.int64).view(np.uint64) * _U64_GAMMA
    words = mix64_array(np.uint64(env_seed) ^ keys)
    return (words >> np.uint64(11)).astype(np.float64) * _INV53


def stream_uniforms(stream_seed: int, start: int, count: int) -> np.ndarray:
    """Vectorized ``stream_uniform`` for indices start .. start+count-1."""
    idx = np.arange(start, start + count, dtype=np.int64).view(np.uint64)
    words = mix64_array(np.uint64(stream_seed) + idx * _U64_GAMMA)
    return (words >> np.uint64(11)).astype(np.float64) * _INV53
