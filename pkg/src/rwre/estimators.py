"""Quantitative checks built on trajectory ensembles and exact linear
algebra: diffusivity estimation with jackknife errors, the theorem's
two-sided bounds, CLT diagnostics, heat-kernel decay profiles, the exact
edge-cut identity, and the random-scenery variance comparison.

Statistical comparisons are specified as 3-standard-error bands; guard
factors for simultaneous checks are the caller's responsibility.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.stats

from . import lattice, rng, spectral
from .environment import Environment, RateDecomposition, decompose


@dataclass
class EnsembleStats:
    mean: np.ndarray
    cov: np.ndarray
    se_mean: np.ndarray
    n: int
    horizon: float

    @classmethod
    def from_samples(cls, samples: np.ndarray, horizon: float = 0.0) -> "EnsembleStats":
        samples = np.atleast_2d(samples)
        n = samples.shape[0]
        mean = samples.mean(axis=0)
        cov = np.cov(samples, rowvar=False).reshape(samples.shape[1], samples.shape[1])
        se = np.sqrt(np.diag(cov) / n)
        return cls(mean, cov, se, n, horizon)


def _jackknife_cov_se(X: np.ndarray) -> np.ndarray:
    """Delete-one jackknife standard errors of the sample covariance matrix."""
    n, d = X.shape
    s = X.sum(axis=0)
    cross = X.T @ X
    m_loo = (s[None, :] - X) / (n - 1)                       # (n, d)
    cross_loo = cross[None, :, :] - X[:, :, None] * X[:, None, :]
    cov_loo = (cross_loo - (n - 1) * m_loo[:, :, None] * m_loo[:, None, :]) / (n - 2)
    cov_bar = cov_loo.mean(axis=0)
    var_jack = (n - 1) / n * ((cov_loo - cov_bar) ** 2).sum(axis=0)
    return np.sqrt(var_jack)


@dataclass
class Sigma2Estimate:
    sigma2: np.ndarray
    se: np.ndarray
    n: int
    t: float
    few_jumps: bool

    def within(self, reference: np.ndarray, z: float = 3.0) -> bool:
        return bool(np.all(np.abs(self.sigma2 - reference) <= z * self.se))


def msd_diffusivity(endpoints: np.ndarray, t: float, njumps=None,
                    min_jumps: float = 10.0) -> Sigma2Estimate:
    """sigma2_hat = sample covariance of the endpoints divided by t, with
    delete-one jackknife standard errors; flags pre-asymptotic horizons."""
    X = np.atleast_2d(np.asarray(endpoints, dtype=float))
    if X.shape[0] < 1000:
        raise ValueError("need at least 1000 paths for the MSD estimator")
    cov = np.cov(X, rowvar=False).reshape(X.shape[1], X.shape[1])
    se = _jackknife_cov_se(X) / t
    few = bool(njumps is not None and float(np.mean(njumps)) < min_jumps)
    return Sigma2Estimate(cov / t, se, X.shape[0], float(t), few)


@dataclass
class BoundsReport:
    directions: np.ndarray
    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    margins: np.ndarray
    lower_ok: np.ndarray
    upper_ok: np.ndarray

    @property
    def all_pass(self) -> bool:
        return bool(np.all(self.lower_ok) and np.all(self.upper_ok))


def bounds_check(sigma2: np.ndarray, s_star: float, s_upper: float,
                 ctilde: np.ndarray, dtilde: np.ndarray, se=None,
                 n_random: int = 20, seed: int = 0, z: float = 3.0) -> BoundsReport:
    """Check 2 s_star |v|^2 <= v' sigma2 v <= 6 s_upper |v|^2 +
    (24 / s_star) v' (Ctilde + Dtilde) v over the axis directions and
    `n_random` random unit vectors; simulated estimates widen both sides by
    z standard errors."""
    d = sigma2.shape[0]
    dirs = [np.eye(d)[a] for a in range(d)] + [-np.eye(d)[a] for a in range(d)]
    key = rng.derive_key(seed, "bounds-directions")
    raw = rng.normal(key, np.arange(n_random * d)).reshape(n_random, d)
    for row in raw:
        dirs.append(row / np.linalg.norm(row))
    dirs = np.asarray(dirs)
    cd = ctilde + dtilde
    vals = np.einsum("ki,ij,kj->k", dirs, sigma2, dirs)
    lower = 2.0 * s_star * np.sum(dirs**2, axis=1)
    upper = 6.0 * s_upper * np.sum(dirs**2, axis=1) \
        + 24.0 / s_star * np.einsum("ki,ij,kj->k", dirs, cd, dirs)
    if se is None:
        margins = np.zeros(len(dirs))
    else:
        margins = z * np.einsum("ki,ij,kj->k", np.abs(dirs), se, np.abs(dirs))
    return BoundsReport(dirs, vals, lower, upper, margins,
                        vals >= lower - margins, vals <= upper + margins)


@dataclass
class CLTReport:
    ks_distance: np.ndarray
    skewness: np.ndarray
    excess_kurtosis: np.ndarray
    increment_corr: np.ndarray | None
    preasymptotic: bool

    def passes(self, ks_threshold: float = 0.02) -> bool:
        if self.preasymptotic:
            return True
        return bool(np.all(self.ks_distance < ks_threshold))


def clt_diagnostics(endpoints: np.ndarray, sigma2: np.ndarray, t: float,
                    midpoints=None, njumps=None, min_jumps: float = 30.0) -> CLTReport:
    """Standardize endpoints by (sigma2 t)^{-1/2} and compare each
    coordinate to the standard normal (Kolmogorov-Smirnov distance, skewness,
    excess kurtosis).  With midpoint samples, also checks that the two-leg
    increments are uncorrelated.  Horizons with too few jumps are flagged
    pre-asymptotic rather than failed."""
    X = np.atleast_2d(np.asarray(endpoints, dtype=float))
    w, V = np.linalg.eigh(sigma2 * t)
    if np.min(w) <= 0:
        raise ValueError("singular covariance; cannot standardize")
    inv_sqrt = (V / np.sqrt(w)) @ V.T
    Z = X @ inv_sqrt
    d = Z.shape[1]
    ks = np.array([scipy.stats.kstest(Z[:, a], "norm").statistic for a in range(d)])
    skew = scipy.stats.skew(Z, axis=0)
    kurt = scipy.stats.kurtosis(Z, axis=0)
    corr = None
    if midpoints is not None:
        Z1 = np.atleast_2d(np.asarray(midpoints, dtype=float)) @ inv_sqrt
        inc = Z - Z1
        corr = np.array([np.corrcoef(Z1[:, a], inc[:, a])[0, 1] for a in range(d)])
    pre = bool(njumps is not None and float(np.mean(njumps)) < min_jumps)
    return CLTReport(ks, skew, kurt, corr, pre)


# ---------------------------------------------------------------------------
# heat kernel of the half-lazy auxiliary walk
# ---------------------------------------------------------------------------

@dataclass
class HeatKernelProfile:
    n: np.ndarray
    a_n: np.ndarray

    @property
    def peak(self) -> float:
        return float(np.max(self.a_n))


def lazy_flow_fields(env_y: Environment) -> np.ndarray:
    """V_k = v_k / s_star(Y) in [-1, 1] for the half-lazy walk of the
    auxiliary environment (whose symmetric part is the constant s_star(Y))."""
    dec = decompose(env_y)
    V = dec.v / env_y.s_star
    if float(np.max(np.abs(V))) > 1.0 + 1e-12:
        raise ValueError("flow exceeds the symmetric level; not an auxiliary environment")
    return V


def heat_kernel_profile(env_y: Environment, n_max: int) -> HeatKernelProfile:
    """a_n = n^{d/2} sup_x p^n(0, x) for the half-lazy walk (stay 1/2, move
    (1 + V_k)/(4d)), computed by exact repeated kernel application.

    n_max may not exceed (L/4)^2 so the diffusive spread stays clear of the
    torus wraparound and the profile reflects the infinite-lattice walk."""
    d, L = env_y.d, env_y.L
    horizon = (L // 4) ** 2
    if n_max > horizon:
        raise ValueError(f"n_max {n_max} beyond wrap-safe horizon {horizon}")
    V = lazy_flow_fields(env_y)
    weights = [(1.0 + V[j]) / (4 * d) for j in range(2 * d)]
    pn = np.zeros((L,) * d)
    pn[(0,) * d] = 1.0
    a = np.empty(n_max)
    for n in range(1, n_max + 1):
        new = 0.5 * pn
        for j in range(2 * d):
            new = new + lattice.shift(pn * weights[j], lattice.opposite(j))
        pn = new
        a[n - 1] = n ** (d / 2.0) * float(np.max(pn))
    return HeatKernelProfile(np.arange(1, n_max + 1), a)


# ---------------------------------------------------------------------------
# exact edge-cut identity
# ---------------------------------------------------------------------------

def random_connected_set(d: int, L: int, size: int, seed: int) -> np.ndarray:
    """Random connected site set grown inside the interior box [1, L-2]^d,
    returned as a boolean mask; never wraps around the torus."""
    if size > (L - 2) ** d // 2:
        raise ValueError("requested set too large for the interior box")
    key = rng.derive_key(seed, "cut-set")
    start = 1 + lattice.site_coords(rng.integers(key, 0, (L - 2) ** d), d, L - 2)
    chosen = {tuple(start)}
    frontier = [tuple(start)]
    steps = lattice.step_vectors(d)
    ctr = 1
    while len(chosen) < size and frontier:
        idx = int(rng.integers(key, ctr, len(frontier)))
        ctr += 1
        base = frontier[idx]
        j = int(rng.integers(key, ctr, 2 * d))
        ctr += 1
        cand = tuple(np.asarray(base) + steps[j])
        if all(1 <= c <= L - 2 for c in cand) and cand not in chosen:
            chosen.add(cand)
            frontier.append(cand)
        elif len(frontier) > 1 and ctr % 7 == 0:
            frontier.pop(idx)
    mask = np.zeros((L,) * d, dtype=bool)
    for c in chosen:
        mask[c] = True
    return mask


def edge_cut_identity(env_y: Environment, masks) -> np.ndarray:
    """Residuals |Q(S, S^c) - |dS| / (4d)| for the half-lazy walk; an exact
    algebraic identity for sourceless flows.  Sets whose 1-neighborhood
    wraps the torus are refused."""
    d, L = env_y.d, env_y.L
    V = lazy_flow_fields(env_y)
    residuals = np.empty(len(masks))
    for idx, mask in enumerate(masks):
        if mask.shape != (L,) * d or mask.dtype != bool:
            raise ValueError("mask must be a boolean torus field")
        for a in range(d):
            occupied = np.any(mask, axis=tuple(ax for ax in range(d) if ax != a))
            if occupied[0] and occupied[-1]:
                raise ValueError("set (or its neighborhood) wraps the torus")
        q = 0.0
        boundary = 0
        for j in range(2 * d):
            outside = ~lattice.shift(mask, j)       # neighbor x + k_j not in S
            cut = mask & outside
            boundary += int(np.count_nonzero(cut))
            q += float(np.sum((1.0 + V[j][cut])) / (4 * d))
        residuals[idx] = abs(q - boundary / (4 * d))
    return residuals


# ---------------------------------------------------------------------------
# scenery variance vs the closed-form spectral sum
# ---------------------------------------------------------------------------

def scenery_variance_oracle(dec: RateDecomposition, T: float):
    """Exact finite-horizon value of E |int_0^T Phi(S(t)) dt|^2 / T for the
    unit-rate-per-direction symmetric walk, summed per frequency:
    2 sum_i int_0^T ((T-s)/T) <phi_i, e^{s Delta} phi_i> ds.

    Returns (finite_T_value, infinite_T_limit)."""
    d, L, n = dec.d, dec.L, dec.n_sites
    lam = spectral.laplacian_symbol(d, L)
    power = np.zeros_like(lam)
    for a in range(d):
        power += np.abs(np.fft.fftn(dec.phi[a])) ** 2
    mask = lam > 0
    lm = lam[mask]
    pw = power[mask]
    coef = 1.0 / lm - (1.0 - np.exp(-lm * T)) / (T * lm**2)
    finite = 2.0 * float(np.sum(pw * coef)) / n**2
    infinite = 2.0 * float(np.sum(pw / lm)) / n**2
    return finite, infinite


def scenery_variance_check(dec: RateDecomposition, samples: np.ndarray,
                           T: float, z: float = 3.0) -> dict:
    """Compare the Monte Carlo scenery variance (per-component sum / T)
    against the closed-form spectral sum at the same horizon."""
    S = np.atleast_2d(np.asarray(samples, dtype=float))
    n = S.shape[0]
    center = S - S.mean(axis=0)
    per_path = np.sum(center**2, axis=1)          # within-path squared norm
    mc = float(np.sum(np.var(S, axis=0, ddof=1))) / T
    se = float(np.std(per_path, ddof=1) / np.sqrt(n)) / T
    oracle, oracle_inf = scenery_variance_oracle(dec, T)
    return {
        "mc": mc,
        "se": se,
        "oracle": oracle,
        "oracle_infinite_horizon": oracle_inf,
        "within": bool(abs(mc - oracle) <= z * se),
    }
