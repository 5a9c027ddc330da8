"""Numba kernel backend: JIT-compiled per-path loops, parallel over paths.

Draw-for-draw identical to the numpy backend; each path owns two counter
streams (clock/direction pairs indexed by tick, coins indexed by jump
count), so results do not depend on thread count or path order.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO = np.uint64(2)
_INV53 = 2.0 ** -53


@njit(cache=True, inline="always")
def _u01(key, ctr):
    z = key + ctr * _GOLDEN
    z = z + _GOLDEN
    z = (z ^ (z >> _U30)) * _MIX1
    z = (z ^ (z >> _U27)) * _MIX2
    z = z ^ (z >> _U31)
    return (np.float64(z >> _U11) + 0.5) * _INV53


@njit(cache=True, parallel=True)
def ct_ensemble(rates, nbr, steps, fields, T, lam, keys, starts):
    P = keys.size
    d = steps.shape[1]
    m = fields.shape[0]
    n_dirs = rates.shape[0]
    X = np.zeros((P, d), dtype=np.int64)
    F = np.zeros((P, m))
    njumps = np.zeros(P, dtype=np.int64)
    end = np.empty(P, dtype=np.int64)
    for p in prange(P):
        key = keys[p]
        s = starts[p]
        t = 0.0
        tick = np.uint64(0)
        alive = True
        while alive:
            dt = -np.log(_u01(key, _TWO * tick)) / lam
            tn = t + dt
            if tn >= T:
                rem = T - t
                for q in range(m):
                    F[p, q] += rem * fields[q, s]
                alive = False
            else:
                for q in range(m):
                    F[p, q] += dt * fields[q, s]
                t = tn
                c = _u01(key, _TWO * tick + _ONE) * lam
                j = -1
                for jj in range(n_dirs):
                    r = rates[jj, s]
                    if j < 0:
                        if c < r:
                            j = jj
                        else:
                            c -= r
                if j >= 0:
                    for a in range(d):
                        X[p, a] += steps[j, a]
                    s = nbr[j, s]
                    njumps[p] += 1
                tick += _ONE
        end[p] = s
    return X, F, njumps, end


@njit(cache=True, parallel=True)
def ct_klj_ensemble(rates, nbr, steps, q_rates, phit, psit, T, lam, keys,
                    coin_keys, starts):
    P = keys.size
    d = steps.shape[1]
    n_dirs = rates.shape[0]
    X = np.zeros((P, d), dtype=np.int64)
    K = np.zeros((P, d))
    Lm = np.zeros((P, d))
    J = np.zeros((P, d))
    njumps = np.zeros(P, dtype=np.int64)
    for p in prange(P):
        key = keys[p]
        ckey = coin_keys[p]
        s = starts[p]
        t = 0.0
        tick = np.uint64(0)
        nj = np.uint64(0)
        alive = True
        while alive:
            dt = -np.log(_u01(key, _TWO * tick)) / lam
            tn = t + dt
            if tn >= T:
                rem = T - t
                for a in range(d):
                    K[p, a] -= rem * phit[a, s]
                    Lm[p, a] -= rem * psit[a, s]
                    J[p, a] += rem * phit[a, s]
                    J[p, a] += rem * psit[a, s]
                alive = False
            else:
                for a in range(d):
                    K[p, a] -= dt * phit[a, s]
                    Lm[p, a] -= dt * psit[a, s]
                    J[p, a] += dt * phit[a, s]
                    J[p, a] += dt * psit[a, s]
                t = tn
                c = _u01(key, _TWO * tick + _ONE) * lam
                j = -1
                for jj in range(n_dirs):
                    r = rates[jj, s]
                    if j < 0:
                        if c < r:
                            j = jj
                        else:
                            c -= r
                if j >= 0:
                    coin = _u01(ckey, nj)
                    accept = coin < q_rates[j, s] / rates[j, s]
                    for a in range(d):
                        X[p, a] += steps[j, a]
                        if accept:
                            K[p, a] += steps[j, a]
                        else:
                            Lm[p, a] += steps[j, a]
                    s = nbr[j, s]
                    njumps[p] += 1
                    nj += _ONE
                tick += _ONE
    return X, K, Lm, J, njumps


@njit(cache=True, parallel=True)
def lazy_ensemble(rates, nbr, steps, n_steps, lam, keys, starts):
    P = keys.size
    d = steps.shape[1]
    n_dirs = rates.shape[0]
    X = np.zeros((P, d), dtype=np.int64)
    end = np.empty(P, dtype=np.int64)
    for p in prange(P):
        key = keys[p]
        s = starts[p]
        for step in range(n_steps):
            c = _u01(key, np.uint64(step)) * lam
            j = -1
            for jj in range(n_dirs):
                r = rates[jj, s]
                if j < 0:
                    if c < r:
                        j = jj
                    else:
                        c -= r
            if j >= 0:
                for a in range(d):
                    X[p, a] += steps[j, a]
                s = nbr[j, s]
        end[p] = s
    return X, end
