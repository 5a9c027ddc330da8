"""Periodic bistochastic environments: construction, validation, decomposition.

The probability space of environments is realized as the uniform measure on
the L^d translates of a single periodic rate configuration, so every
expectation over environments is a spatial average over the torus.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import lattice

HEADER_MAGIC = "rwre-env"
HEADER_VERSION = 1


class EnvironmentFormatError(Exception):
    """Structural defect (wrong shapes, corrupt file); distinct from a failed
    bistochasticity/ellipticity check."""


@dataclass(frozen=True)
class Environment:
    """Jump-rate fields p_k(x) for the 2d unit directions on an L^d torus.

    rates[j] holds p_{k_j}; direction indexing follows :mod:`rwre.lattice`.
    s_star is the declared ellipticity floor for the symmetric parts,
    s_upper the ceiling on individual rates.
    """

    d: int
    L: int
    rates: np.ndarray
    s_star: float
    s_upper: float
    generator: str = "unknown"
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (2 <= self.d <= 4):
            raise EnvironmentFormatError(f"dimension {self.d} unsupported (need 2..4)")
        if self.L < 8 or (self.L & (self.L - 1)) != 0:
            raise EnvironmentFormatError(f"torus side {self.L} must be a power of two >= 8")
        expected = (2 * self.d,) + (self.L,) * self.d
        if self.rates.shape != expected:
            raise EnvironmentFormatError(
                f"rate field shape {self.rates.shape} != expected {expected}")
        if not np.all(np.isfinite(self.rates)):
            raise EnvironmentFormatError("non-finite rate values")
        if not (0 < self.s_star <= self.s_upper):
            raise EnvironmentFormatError("need 0 < s_star <= s_upper")
        self.rates.setflags(write=False)

    @property
    def n_sites(self) -> int:
        return self.L**self.d

    @property
    def shape(self) -> tuple:
        return (self.L,) * self.d

    def total_rate(self) -> np.ndarray:
        """p(x) = sum_k p_k(x)."""
        return self.rates.sum(axis=0)

    def flat_rates(self) -> np.ndarray:
        return np.ascontiguousarray(self.rates.reshape(2 * self.d, self.n_sites))

    def neighbor_table(self) -> np.ndarray:
        return lattice.neighbor_table(self.d, self.L)

    def translated(self, z) -> "Environment":
        """Environment seen from offset z (all rate fields shifted by z)."""
        shifted = np.stack([lattice.shift_by(self.rates[j], z) for j in range(2 * self.d)])
        return Environment(self.d, self.L, shifted, self.s_star, self.s_upper,
                           self.generator, self.seed, dict(self.meta))

    def time_rescaled(self, factor: float) -> "Environment":
        """Multiply all rates by `factor` (e.g. 1/s_star to normalize the
        ellipticity floor to 1)."""
        return Environment(self.d, self.L, self.rates * factor,
                           self.s_star * factor, self.s_upper * factor,
                           self.generator, self.seed, dict(self.meta))


@dataclass(frozen=True)
class RateDecomposition:
    """Antisymmetric/symmetric split of the rates plus the two drift fields.

    v[j](x) = (p_j(x) - p_{-j}(x+k_j))/2,  s[j](x) = (p_j(x) + p_{-j}(x+k_j))/2,
    phi[i]  = sum_k k_i v_k,               psi[i]  = sum_k k_i s_k.
    """

    d: int
    L: int
    v: np.ndarray
    s: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    s_star: float
    s_upper: float

    @property
    def n_sites(self) -> int:
        return self.L**self.d

    def recombined(self) -> np.ndarray:
        return self.s + self.v


@dataclass
class CheckResult:
    name: str
    residual: float
    tolerance: float
    passed: bool
    worst_site: tuple


@dataclass
class ValidationReport:
    checks: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def __getitem__(self, name: str) -> CheckResult:
        return self.checks[name]

    def summary(self) -> str:
        lines = []
        for c in self.checks.values():
            status = "pass" if c.passed else "FAIL"
            lines.append(f"{c.name:16s} {status}  residual={c.residual:.3e} tol={c.tolerance:.1e}")
        return "\n".join(lines)


def _worst(arr: np.ndarray) -> tuple:
    idx = np.unravel_index(np.argmax(np.abs(arr)), arr.shape)
    return tuple(int(i) for i in idx)


def validate(env: Environment, rel_tol: float = 1e-12) -> ValidationReport:
    """Check bistochasticity, ellipticity, boundedness and no-drift.

    Residual tolerances are `rel_tol` relative to the rate scale s_upper;
    dyadic-rational rate fields produce exactly zero residuals.
    """
    scale = env.s_upper
    tol = rel_tol * scale
    checks = {}

    outflow = env.rates.sum(axis=0)
    inflow = np.zeros_like(outflow)
    for j in range(2 * env.d):
        inflow = inflow + lattice.shift(env.rates[lattice.opposite(j)], j)
    resid = outflow - inflow
    r = float(np.max(np.abs(resid)))
    checks["bistochasticity"] = CheckResult("bistochasticity", r, tol, r <= tol, _worst(resid))

    dec = _decompose_unchecked(env)

    s_min = env.rates[0] * 0 + np.inf
    for j in range(2 * env.d):
        s_min = np.minimum(s_min, dec.s[j])
    resid = np.maximum(env.s_star - s_min, 0.0)
    r = float(np.max(resid))
    checks["ellipticity"] = CheckResult("ellipticity", r, tol, r <= tol, _worst(resid))

    resid = np.maximum(np.maximum(-env.rates, env.rates - env.s_upper), 0.0)
    r = float(np.max(resid))
    checks["boundedness"] = CheckResult("boundedness", r, tol, r <= tol, _worst(resid))

    means = np.array([float(np.mean(dec.v[j])) for j in range(2 * env.d)])
    r = float(np.max(np.abs(means)))
    checks["no_drift"] = CheckResult("no_drift", r, tol, r <= tol, (int(np.argmax(np.abs(means))),))

    return ValidationReport(checks)


def _decompose_unchecked(env: Environment) -> RateDecomposition:
    d = env.d
    v = np.empty_like(env.rates)
    s = np.empty_like(env.rates)
    for j in range(2 * d):
        p_rev = lattice.shift(env.rates[lattice.opposite(j)], j)
        v[j] = (env.rates[j] - p_rev) / 2.0
        s[j] = (env.rates[j] + p_rev) / 2.0
    phi = np.empty((d,) + env.shape)
    psi = np.empty((d,) + env.shape)
    for a in range(d):
        phi[a] = v[2 * a] - v[2 * a + 1]
        psi[a] = s[2 * a] - s[2 * a + 1]
    return RateDecomposition(d, env.L, v, s, phi, psi, env.s_star, env.s_upper)


def decompose(env: Environment, check: bool = True) -> RateDecomposition:
    """Split rates into sourceless-flow and symmetric parts; env must validate."""
    if check:
        report = validate(env)
        if not report.passed:
            raise ValueError("environment fails validation:\n" + report.summary())
    return _decompose_unchecked(env)


def mean_drift(dec: RateDecomposition, rel_tol: float = 1e-12):
    """Torus mean of Phi + Psi and a flag for it being (numerically) zero."""
    d = dec.d
    drift = np.array([float(np.mean(dec.phi[a] + dec.psi[a])) for a in range(d)])
    is_zero = bool(np.all(np.abs(drift) <= rel_tol * dec.s_upper))
    return drift, is_zero


# ---------------------------------------------------------------------------
# Environment container format: one JSON header line, then the 2d rate
# arrays as little-endian float64, each raveled with coordinate 1 fastest.
# ---------------------------------------------------------------------------

def save_environment(env: Environment, path) -> None:
    header = {
        "format": HEADER_MAGIC,
        "version": HEADER_VERSION,
        "d": env.d,
        "L": env.L,
        "s_star": env.s_star,
        "s_upper": env.s_upper,
        "generator": env.generator,
        "seed": env.seed,
        "meta": env.meta,
        "dtype": "<f8",
        "site_order": "coordinate-1-fastest",
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode())
        fh.write(b"\n")
        for j in range(2 * env.d):
            fh.write(np.ravel(env.rates[j], order="F").astype("<f8").tobytes())


def load_environment(path) -> Environment:
    with open(path, "rb") as fh:
        line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(line.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise EnvironmentFormatError(f"bad header: {exc}") from exc
    if header.get("format") != HEADER_MAGIC:
        raise EnvironmentFormatError("not an rwre environment file")
    if header.get("version") != HEADER_VERSION:
        raise EnvironmentFormatError(f"unsupported version {header.get('version')}")
    d, L = int(header["d"]), int(header["L"])
    n = L**d
    expected = 2 * d * n * 8
    if len(blob) != expected:
        raise EnvironmentFormatError(f"payload is {len(blob)} bytes, expected {expected}")
    rates = np.empty((2 * d,) + (L,) * d)
    for j in range(2 * d):
        flat = np.frombuffer(blob, dtype="<f8", count=n, offset=j * n * 8)
        rates[j] = flat.reshape((L,) * d, order="F")
    return Environment(d, L, rates, float(header["s_star"]), float(header["s_upper"]),
                       header.get("generator", "unknown"), int(header.get("seed", 0)),
                       header.get("meta", {}))
