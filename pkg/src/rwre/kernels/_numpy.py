"""Pure-numpy kernel backend: vectorized over paths, looping over global
uniformization ticks.  Random consumption matches the numba backend draw for
draw: tick m of path p uses counters (2m, 2m+1) of the path's stream, and
the n-th accepted jump uses counter n of the path's coin stream.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV53 = 2.0 ** -53


def _u01(keys, ctr):
    """Uniform(0,1) draws; keys may be an array, ctr a scalar or array."""
    with np.errstate(over="ignore"):
        z = np.asarray(keys, dtype=np.uint64) + np.asarray(ctr, dtype=np.uint64) * _GOLDEN
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53


def _pick_direction(rates, sites, u_scaled, active):
    """Sequential-subtraction direction scan, replicating the per-path order
    of the numba backend bit for bit.  Returns -1 where the tick is lazy."""
    n_dirs = rates.shape[0]
    chosen = np.full(sites.shape, -1, dtype=np.int64)
    c = u_scaled.copy()
    for j in range(n_dirs):
        r = rates[j, sites]
        hit = active & (chosen == -1) & (c < r)
        chosen[hit] = j
        undecided = active & (chosen == -1)
        c = np.where(undecided, c - r, c)
    return chosen


def ct_ensemble(rates, nbr, steps, fields, T, lam, keys, starts):
    """Continuous-time walk ensemble by uniformization at total rate `lam`.

    Returns (X, F, njumps, end_site): integer endpoint displacements (P, d),
    exact piecewise-constant path integrals of `fields` (P, m), jump counts
    and final (wrapped) site indices.
    """
    P = keys.size
    d = steps.shape[1]
    m = fields.shape[0]
    X = np.zeros((P, d), dtype=np.int64)
    F = np.zeros((P, m))
    njumps = np.zeros(P, dtype=np.int64)
    sites = starts.astype(np.int64).copy()
    t = np.zeros(P)
    alive = np.ones(P, dtype=bool)
    tick = 0
    while alive.any():
        dt = -np.log(_u01(keys, 2 * tick)) / lam
        t_next = t + dt
        finish = alive & (t_next >= T)
        if finish.any():
            rem = T - t[finish]
            F[finish] += rem[:, None] * fields[:, sites[finish]].T
            alive = alive & ~finish
            if not alive.any():
                break
        F[alive] += dt[alive, None] * fields[:, sites[alive]].T
        t = np.where(alive, t_next, t)
        u2 = _u01(keys, 2 * tick + 1) * lam
        chosen = _pick_direction(rates, sites, u2, alive)
        moved = chosen >= 0
        if moved.any():
            j = chosen[moved]
            X[moved] += steps[j]
            sites[moved] = nbr[j, sites[moved]]
            njumps[moved] += 1
        tick += 1
    return X, F, njumps, sites


def ct_klj_ensemble(rates, nbr, steps, q_rates, phit, psit, T, lam, keys,
                    coin_keys, starts):
    """Walk ensemble carrying the forward-backward decomposition.

    At each accepted jump in direction j from site s, a coin with success
    probability q_rates[j, s] / rates[j, s] routes the jump increment into K
    (success) or L (failure); the compensator integrals of phit/psit are
    accumulated exactly per holding interval.  Returns (X, K, L, J, njumps).
    """
    P = keys.size
    d = steps.shape[1]
    X = np.zeros((P, d), dtype=np.int64)
    K = np.zeros((P, d))
    Lm = np.zeros((P, d))
    J = np.zeros((P, d))
    njumps = np.zeros(P, dtype=np.int64)
    sites = starts.astype(np.int64).copy()
    t = np.zeros(P)
    alive = np.ones(P, dtype=bool)
    tick = 0
    while alive.any():
        dt = -np.log(_u01(keys, 2 * tick)) / lam
        t_next = t + dt
        finish = alive & (t_next >= T)
        if finish.any():
            rem = (T - t[finish])[:, None]
            s_f = sites[finish]
            K[finish] -= rem * phit[:, s_f].T
            Lm[finish] -= rem * psit[:, s_f].T
            J[finish] += rem * phit[:, s_f].T
            J[finish] += rem * psit[:, s_f].T
            alive = alive & ~finish
            if not alive.any():
                break
        s_a = sites[alive]
        dta = dt[alive, None]
        K[alive] -= dta * phit[:, s_a].T
        Lm[alive] -= dta * psit[:, s_a].T
        J[alive] += dta * phit[:, s_a].T
        J[alive] += dta * psit[:, s_a].T
        t = np.where(alive, t_next, t)
        u2 = _u01(keys, 2 * tick + 1) * lam
        chosen = _pick_direction(rates, sites, u2, alive)
        moved = chosen >= 0
        if moved.any():
            j = chosen[moved]
            s_m = sites[moved]
            coin = _u01(coin_keys[moved], njumps[moved])
            accept = coin < q_rates[j, s_m] / rates[j, s_m]
            X[moved] += steps[j]
            kmask = np.zeros(P, dtype=bool)
            kmask[np.flatnonzero(moved)[accept]] = True
            lmask = np.zeros(P, dtype=bool)
            lmask[np.flatnonzero(moved)[~accept]] = True
            K[kmask] += steps[chosen[kmask]]
            Lm[lmask] += steps[chosen[lmask]]
            sites[moved] = nbr[j, s_m]
            njumps[moved] += 1
        tick += 1
    return X, K, Lm, J, njumps


def lazy_ensemble(rates, nbr, steps, n_steps, lam, keys, starts):
    """Discrete lazy walk: step j with probability rates[j, s] / lam, stay
    otherwise.  Returns (X, end_site)."""
    P = keys.size
    d = steps.shape[1]
    X = np.zeros((P, d), dtype=np.int64)
    sites = starts.astype(np.int64).copy()
    all_active = np.ones(P, dtype=bool)
    for step in range(n_steps):
        u = _u01(keys, step) * lam
        chosen = _pick_direction(rates, sites, u, all_active)
        moved = chosen >= 0
        if moved.any():
            j = chosen[moved]
            X[moved] += steps[j]
            sites[moved] = nbr[j, sites[moved]]
    return X, sites
