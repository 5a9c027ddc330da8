"""Quenched walk simulation: single-trajectory records, martingale and
forward-backward decompositions, the auxiliary constant-symmetric-part walk,
and the random-scenery integral.

Ensembles run through the compiled kernels; single trajectories replay the
same counter streams in python, so a Trajectory reproduces its ensemble row
bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, lattice, rng
from .environment import Environment, RateDecomposition, decompose


@dataclass
class Trajectory:
    """Jump times, directions and derived positions of one quenched path.

    `times` holds the strictly increasing jump epochs in (0, T]; `dirs` the
    direction index of each jump.  Positions are unwrapped lattice
    displacements; `sites` are torus site indices.
    """

    d: int
    L: int
    start_site: int
    times: np.ndarray
    dirs: np.ndarray
    T: float
    seed: int
    path_index: int = 0

    @property
    def n_jumps(self) -> int:
        return self.dirs.size

    def positions(self) -> np.ndarray:
        """(n+1, d) displacements at [0, theta_1, ..., theta_n]."""
        steps = lattice.step_vectors(self.d)
        out = np.zeros((self.n_jumps + 1, self.d), dtype=np.int64)
        if self.n_jumps:
            np.cumsum(steps[self.dirs], axis=0, out=out[1:])
        return out

    def sites(self) -> np.ndarray:
        """(n+1,) torus site indices along the path."""
        nbr = lattice.neighbor_table(self.d, self.L)
        out = np.empty(self.n_jumps + 1, dtype=np.int64)
        out[0] = self.start_site
        for m, j in enumerate(self.dirs):
            out[m + 1] = nbr[j, out[m]]
        return out

    def holding_times(self) -> np.ndarray:
        """Durations of the n+1 holding intervals, the last truncated at T."""
        edges = np.concatenate([[0.0], self.times, [self.T]])
        return np.diff(edges)


def _path_keys(seed: int, label: str, n_paths: int) -> np.ndarray:
    prefix = rng.derive_key(seed, label)
    return rng.mix64(np.uint64(prefix) ^ np.arange(n_paths, dtype=np.uint64))


def _start_sites(env_sites: int, n_paths: int, seed: int, label: str,
                 quenched_start=None) -> np.ndarray:
    if quenched_start is not None:
        return np.full(n_paths, int(quenched_start), dtype=np.int64)
    key = rng.derive_key(seed, label + "-start")
    return rng.integers(key, np.arange(n_paths), env_sites)


def uniformization_rate(env: Environment) -> float:
    return 2 * env.d * env.s_upper


def simulate_ct(env: Environment, start, T: float, seed: int,
                path_index: int = 0) -> Trajectory:
    """Single continuous-time path by uniformization at rate 2 d s_upper:
    exponential global clock, thinned jumps with probability p_k(x) / rate.

    `start` is a flat site index or coordinate tuple; the stream matches
    path `path_index` of the ensemble drivers with the same seed.
    """
    if not np.isscalar(start):
        start = int(lattice.flat_index(np.asarray(start), env.d, env.L))
    rates = env.flat_rates()
    nbr = env.neighbor_table()
    lam = uniformization_rate(env)
    key = int(_path_keys(seed, "ct-path", path_index + 1)[path_index])
    n_dirs = 2 * env.d
    times, dirs = [], []
    s = int(start)
    t = 0.0
    tick = 0
    while True:
        dt = -math.log(float(rng.uniform01(key, 2 * tick))) / lam
        tn = t + dt
        if tn >= T:
            break
        t = tn
        c = float(rng.uniform01(key, 2 * tick + 1)) * lam
        j = -1
        for jj in range(n_dirs):
            r = rates[jj, s]
            if c < r:
                j = jj
                break
            c -= r
        if j >= 0:
            times.append(t)
            dirs.append(j)
            s = int(nbr[j, s])
        tick += 1
    return Trajectory(env.d, env.L, int(start), np.asarray(times),
                      np.asarray(dirs, dtype=np.int64), T, seed, path_index)


def simulate_lazy(env: Environment, n_steps: int, seed: int, start=0,
                  n_paths: int = 1):
    """Discrete lazy walk: step k with probability p_k(x) / (2 d s_upper),
    stay put with the complementary probability.  Returns (X, end_sites)
    for an ensemble started at `start` (or uniformly when start is None)."""
    rates = env.flat_rates()
    nbr = env.neighbor_table()
    steps = lattice.step_vectors(env.d)
    lam = uniformization_rate(env)
    keys = _path_keys(seed, "lazy-path", n_paths)
    starts = _start_sites(env.n_sites, n_paths, seed, "lazy",
                          None if start is None else start)
    return kernels.lazy_ensemble(rates, nbr, steps, int(n_steps), lam, keys, starts)


def run_ct_ensemble(env: Environment, n_paths: int, T: float, seed: int,
                    fields=None, quenched_start=None):
    """Endpoint ensemble: returns dict with X (P, d), field integrals F
    (P, m), njumps and end_sites.  Starts are uniform over the torus
    (annealed) unless `quenched_start` pins one site."""
    rates = env.flat_rates()
    nbr = env.neighbor_table()
    steps = lattice.step_vectors(env.d)
    lam = uniformization_rate(env)
    if fields is None:
        flat_fields = np.zeros((0, env.n_sites))
    else:
        flat_fields = np.ascontiguousarray(
            np.stack([np.asarray(f, dtype=float).reshape(env.n_sites) for f in fields]))
    keys = _path_keys(seed, "ct-path", n_paths)
    starts = _start_sites(env.n_sites, n_paths, seed, "ct", quenched_start)
    X, F, njumps, end = kernels.ct_ensemble(rates, nbr, steps, flat_fields,
                                            float(T), lam, keys, starts)
    return {"X": X.astype(float), "F": F, "njumps": njumps,
            "end_sites": end, "T": float(T), "starts": starts}


def run_mi_ensemble(env: Environment, dec: RateDecomposition, n_paths: int,
                    T: float, seed: int, quenched_start=None):
    """Martingale decomposition endpoints: I = integral of (psi + phi) along
    the path, M = X - I (exact at the horizon)."""
    fields = [dec.phi[a] + dec.psi[a] for a in range(env.d)]
    out = run_ct_ensemble(env, n_paths, T, seed, fields, quenched_start)
    out["I"] = out.pop("F")
    out["M"] = out["X"] - out["I"]
    return out


@dataclass
class KLJFields:
    """Truncated-flow rate split used by the forward-backward decomposition:
    q_k = s_star + u_k with u_k the flow truncated at the ellipticity floor,
    r_k = p_k - q_k >= 0; phit/psit are the matching drift fields."""

    q: np.ndarray
    r: np.ndarray
    phit: np.ndarray
    psit: np.ndarray


def klj_fields(dec: RateDecomposition) -> KLJFields:
    d, n = dec.d, dec.n_sites
    v = dec.v.reshape(2 * d, n)
    s = dec.s.reshape(2 * d, n)
    u = np.sign(v) * np.minimum(np.abs(v), dec.s_star)
    w = np.sign(v) * np.maximum(np.abs(v) - dec.s_star, 0.0)
    q = dec.s_star + u
    r = (s - dec.s_star) + w
    phit = np.empty((d, n))
    psit = np.empty((d, n))
    for a in range(d):
        phit[a] = q[2 * a] - q[2 * a + 1]
        psit[a] = r[2 * a] - r[2 * a + 1]
    return KLJFields(q, r, phit, psit)


def run_klj_ensemble(env: Environment, dec: RateDecomposition, n_paths: int,
                     T: float, seed: int, coin_seed: int, quenched_start=None):
    """Forward-backward decomposition endpoints X = K + L + J.

    Each accepted jump in direction k from site x is routed into K with
    probability q_k(x) / p_k(x) by an independent coin stream; K is then a
    forward-and-backward martingale with constant symmetric part s_star,
    uncorrelated with L + J."""
    fl = klj_fields(dec)
    rates = env.flat_rates()
    nbr = env.neighbor_table()
    steps = lattice.step_vectors(env.d)
    lam = uniformization_rate(env)
    keys = _path_keys(seed, "ct-path", n_paths)
    coin_keys = _path_keys(coin_seed, "klj-coin", n_paths)
    starts = _start_sites(env.n_sites, n_paths, seed, "ct", quenched_start)
    X, K, L, J, njumps = kernels.ct_klj_ensemble(
        rates, nbr, steps, fl.q, fl.phit, fl.psit, float(T), lam, keys,
        coin_keys, starts)
    return {"X": X.astype(float), "K": K, "L": L, "J": J, "njumps": njumps,
            "T": float(T)}


@dataclass
class DecompositionTracks:
    """Decomposition values sampled at [0, theta_1, ..., theta_n, T]."""

    times: np.ndarray
    X: np.ndarray
    parts: dict
    alphas: np.ndarray | None = None

    def reconstruction_residual(self) -> float:
        total = sum(self.parts.values())
        return float(np.max(np.abs(total - self.X)))


def decompose_MI(traj: Trajectory, dec: RateDecomposition) -> DecompositionTracks:
    """I(t) = integral of (phi + psi)(X(s)) ds computed exactly on the
    piecewise-constant path; M = X - I."""
    if (traj.d, traj.L) != (dec.d, dec.L):
        raise ValueError("trajectory/decomposition size mismatch")
    n = traj.n_jumps
    d = traj.d
    sites = traj.sites()
    hold = traj.holding_times()
    drift = (dec.phi + dec.psi).reshape(d, dec.n_sites)
    I = np.zeros((n + 2, d))
    for m in range(n + 1):
        I[m + 1] = I[m] + hold[m] * drift[:, sites[m]]
    pos = traj.positions().astype(float)
    X = np.vstack([pos, pos[-1]])
    times = np.concatenate([[0.0], traj.times, [traj.T]])
    return DecompositionTracks(times, X, {"M": X - I, "I": I})


def decompose_KLJ(traj: Trajectory, dec: RateDecomposition,
                  coin_seed: int) -> DecompositionTracks:
    """Forward-backward split X = K + L + J with per-jump routing coins
    drawn from an independent stream keyed by `coin_seed`; coin m applies to
    the jump ending the m-th holding interval."""
    if (traj.d, traj.L) != (dec.d, dec.L):
        raise ValueError("trajectory/decomposition size mismatch")
    fl = klj_fields(dec)
    rates = (dec.s + dec.v).reshape(2 * dec.d, dec.n_sites)
    n = traj.n_jumps
    d = traj.d
    sites = traj.sites()
    hold = traj.holding_times()
    ckey = int(_path_keys(coin_seed, "klj-coin", traj.path_index + 1)[traj.path_index])
    steps = lattice.step_vectors(d)
    K = np.zeros((n + 2, d))
    L = np.zeros((n + 2, d))
    J = np.zeros((n + 2, d))
    alphas = np.zeros(n, dtype=np.int64)
    for m in range(n + 1):
        s = sites[m]
        K[m + 1] = K[m] - hold[m] * fl.phit[:, s]
        L[m + 1] = L[m] - hold[m] * fl.psit[:, s]
        J[m + 1] = J[m] + hold[m] * (fl.phit[:, s] + fl.psit[:, s])
        if m < n:
            j = traj.dirs[m]
            coin = float(rng.uniform01(ckey, m))
            alpha = coin < fl.q[j, s] / rates[j, s]
            alphas[m] = alpha
            if alpha:
                K[m + 1] += steps[j]
            else:
                L[m + 1] += steps[j]
    pos = traj.positions().astype(float)
    X = np.vstack([pos, pos[-1]])
    times = np.concatenate([[0.0], traj.times, [traj.T]])
    return DecompositionTracks(times, X, {"K": K, "L": L, "J": J}, alphas)


def auxiliary_env(env: Environment, dec: RateDecomposition | None = None) -> Environment:
    """Walk with the symmetric part replaced by the constant s_upper:
    p^Y_k = s_upper + v_k; itself a valid bistochastic environment."""
    if dec is None:
        dec = decompose(env)
    rates = env.s_upper + dec.v
    return Environment(env.d, env.L, rates, env.s_upper, float(np.max(rates)),
                       "auxiliary:" + env.generator, env.seed, dict(env.meta))


def scenery_integral(dec: RateDecomposition, T: float, n_paths: int, seed: int):
    """Samples of the vector integral of the drift field along an
    independent simple symmetric walk (unit rate per direction), with the
    environment offset drawn uniformly per path.  Returns (P, d) samples."""
    d, L, n = dec.d, dec.L, dec.n_sites
    rates = np.ones((2 * d, n))
    nbr = lattice.neighbor_table(d, L)
    steps = lattice.step_vectors(d)
    lam = float(2 * d)
    fields = np.ascontiguousarray(dec.phi.reshape(d, n))
    keys = _path_keys(seed, "scenery-path", n_paths)
    starts = _start_sites(n, n_paths, seed, "scenery", None)
    _, F, _, _ = kernels.ct_ensemble(rates, nbr, steps, fields, float(T),
                                     lam, keys, starts)
    return F
