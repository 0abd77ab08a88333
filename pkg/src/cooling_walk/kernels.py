"""Numba kernels for walk simulation and exact quenched dynamic programming.

The integer-mixing functions replicate ``rng.py`` bit for bit (pinned by a
test); uint64 arithmetic wraps mod 2**64 in numba exactly like the masked
Python versions.  Per-replica randomness depends only on
(master seed, replica index, interval index), so results are independent of
execution order and worker count.

Stream tags: interval k of a replica uses stream 2k for the steps and
stream 2k+1 for the environment sites (k >= 1).  Walks in a fixed, shared
environment use stream 0.
"""

from __future__ import annotations

import numba as nb
import numpy as np

U64 = np.uint64
_GAMMA = U64(0x9E3779B97F4A7C15)
_MIX_A = U64(0xBF58476D1CE4E5B9)
_MIX_B = U64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(nb.uint64(nb.uint64), cache=True, inline="always")
def _mix64(z):
    z = z + _GAMMA
    z = (z ^ (z >> U64(30))) * _MIX_A
    z = (z ^ (z >> U64(27))) * _MIX_B
    return z ^ (z >> U64(31))


@nb.njit(nb.uint64(nb.uint64, nb.uint64, nb.uint64), cache=True, inline="always")
def _derive(master, stream, substream):
    h = _mix64(master)
    h = _mix64(h ^ stream)
    return _mix64(h ^ substream)


@nb.njit(nb.float64(nb.uint64), cache=True, inline="always")
def _unit(word):
    return (word >> U64(11)) * _INV53


@nb.njit(nb.float64(nb.uint64, nb.int64), cache=True, inline="always")
def _site_uniform(env_seed, x):
    return _unit(_mix64(env_seed ^ (U64(x) * _GAMMA)))


@nb.njit(nb.float64(nb.float64, nb.float64[:], nb.float64[:]), cache=True, inline="always")
def _omega_from_uniform(u, omegas, cumw):
    for a in range(cumw.shape[0]):
        if u < cumw[a]:
            return omegas[a]
    return omegas[omegas.shape[0] - 1]


@nb.njit(cache=True)
def rwcre_batch(master, rep_lo, rep_hi, taus, n, omegas, cumw, record_y):
    """Walks from the origin under a cooling map; environments hashed on the fly.

    taus: absolute refresh times tau(0)=0..tau(K) with tau(K) >= n.
    Returns (finals, leftmost, y_increments, boundary) where y_increments has
    one column per completed interval (empty when record_y is false).
    """
    count = rep_hi - rep_lo
    finals = np.zeros(count, dtype=np.int64)
    leftmost = np.zeros(count, dtype=np.int64)
    n_complete = 0
    for k in range(1, taus.shape[0]):
        if taus[k] <= n:
            n_complete += 1
    y_out = np.zeros((count if record_y else 0, n_complete if record_y else 0), dtype=np.int64)
    boundary = np.zeros(count, dtype=np.int64)
    for idx in range(count):
        replica = U64(rep_lo + idx)
        pos = np.int64(0)
        low = np.int64(0)
        for k in range(1, taus.shape[0]):
            t0 = taus[k - 1]
            if t0 >= n:
                break
            t1 = min(taus[k], n)
            start_pos = pos
            env_seed = _derive(U64(master), replica, U64(2 * k + 1))
            state = _derive(U64(master), replica, U64(2 * k))
            for _ in range(t0, t1):
                u_step = _unit(_mix64(state))
                state = state + _GAMMA
                w = _omega_from_uniform(_site_uniform(env_seed, pos), omegas, cumw)
                if u_step < w:
                    pos += 1
                else:
                    pos -= 1
                if pos < low:
                    low = pos
            if taus[k] <= n:
                if record_y:
                    y_out[idx, k - 1] = pos - start_pos
            else:
                boundary[idx] = pos - start_pos
        finals[idx] = pos
        leftmost[idx] = low
    return finals, leftmost, y_out, boundary


@nb.njit(cache=True)
def fixed_env_batch(master, rep_lo, rep_hi, n, env_values, offset, start):
    """Walks of length n in one shared materialized environment.

    env_values[i] is omega at site i + offset; must cover [start-n, start+n].
    """
    count = rep_hi - rep_lo
    finals = np.zeros(count, dtype=np.int64)
    leftmost = np.zeros(count, dtype=np.int64)
    for idx in range(count):
        state = _derive(U64(master), U64(rep_lo + idx), U64(0))
        pos = np.int64(start)
        low = np.int64(start)
        for _ in range(n):
            u_step = _unit(_mix64(state))
            state = state + _GAMMA
            if u_step < env_values[pos - offset]:
                pos += 1
            else:
                pos -= 1
            if pos < low:
                low = pos
        finals[idx] = pos
        leftmost[idx] = low
    return finals, leftmost


@nb.njit(cache=True)
def leftmost_batch(master, rep_lo, rep_hi, n_cap, omegas, cumw):
    """Annealed walks (fresh hashed environment per replica), leftmost record."""
    count = rep_hi - rep_lo
    lows = np.zeros(count, dtype=np.int64)
    for idx in range(count):
        replica = U64(rep_lo + idx)
        env_seed = _derive(U64(master), replica, U64(3))
        state = _derive(U64(master), replica, U64(2))
        pos = np.int64(0)
        low = np.int64(0)
        for _ in range(n_cap):
            u_step = _unit(_mix64(state))
            state = state + _GAMMA
            w = _omega_from_uniform(_site_uniform(env_seed, pos), omegas, cumw)
            if u_step < w:
                pos += 1
            else:
                pos -= 1
            if pos < low:
                low = pos
        lows[idx] = low
    return lows


@nb.njit(cache=True)
def hit_batch(master, rep_lo, rep_hi, env_values, offset, start, a, b, t_max):
    """First-passage walks from start until hitting a or b; returns hit sites."""
    count = rep_hi - rep_lo
    hits = np.zeros(count, dtype=np.int64)
    for idx in range(count):
        state = _derive(U64(master), U64(rep_lo + idx), U64(0))
        pos = np.int64(start)
        for _ in range(t_max):
            if pos == a or pos == b:
                break
            u_step = _unit(_mix64(state))
            state = state + _GAMMA
            if u_step < env_values[pos - offset]:
                pos += 1
            else:
                pos -= 1
        hits[idx] = pos
    return hits


@nb.njit(cache=True)
def dp_distribution(env_values, n, start, offset):
    """Exact forward DP over n steps; env_values[i] = omega at site i + offset.

    Returns the probability mass over sites start-n .. start+n (2n+1 entries).
    Only parity-admissible sites inside the light cone are touched.
    """
    size = 2 * n + 1
    cur = np.zeros(size)
    nxt = np.zeros(size)
    cur[n] = 1.0  # index i <-> site start + (i - n)
    for t in range(n):
        r = t + 1
        for i in range(n - r, n + r + 1, 2):
            m = 0.0
            if i - 1 >= n - t:
                site = start + (i - 1 - n)
                m += cur[i - 1] * env_values[site - offset]
            if i + 1 <= n + t:
                site = start + (i + 1 - n)
                m += cur[i + 1] * (1.0 - env_values[site - offset])
            nxt[i] = m
        tmp = cur
        cur = nxt
        nxt = tmp
    # the swap buffer still holds stale time n-1 mass on the opposite parity
    for i in range(size):
        if (i - n) % 2 != n % 2:
            cur[i] = 0.0
    return cur


@nb.njit(cache=True)
def dp_mean_curve(env_values, offset, start, n_grid):
    """Quenched means E[Z_t] at the (sorted) times in n_grid, from one DP pass."""
    n_max = n_grid[-1]
    size = 2 * n_max + 1
    cur = np.zeros(size)
    nxt = np.zeros(size)
    cur[n_max] = 1.0
    means = np.zeros(n_grid.shape[0])
    gi = 0
    if n_grid[0] == 0:
        means[0] = float(start)
        gi = 1
    for t in range(n_max):
        r = t + 1
        for i in range(n_max - r, n_max + r + 1, 2):
            m = 0.0
            if i - 1 >= n_max - t:
                site = start + (i - 1 - n_max)
                m += cur[i - 1] * env_values[site - offset]
            if i + 1 <= n_max + t:
                site = start + (i + 1 - n_max)
                m += cur[i + 1] * (1.0 - env_values[site - offset])
            nxt[i] = m
        tmp = cur
        cur = nxt
        nxt = tmp
        if gi < n_grid.shape[0] and t + 1 == n_grid[gi]:
            acc = 0.0
            for i in range(n_max - r, n_max + r + 1, 2):
                acc += cur[i] * (start + (i - n_max))
            means[gi] = acc
            gi += 1
    return means


@nb.njit(cache=True)
def dp_moments(env_values, n, start, offset):
    """(E[Z_n], E[Z_n^2]) for the quenched walk, by exact DP."""
    mass = dp_distribution(env_values, n, start, offset)
    m1 = 0.0
    m2 = 0.0
    for i in range(mass.shape[0]):
        p = mass[i]
        if p > 0.0:
            site = float(start + (i - n))
            m1 += p * site
            m2 += p * site * site
    return m1, m2
