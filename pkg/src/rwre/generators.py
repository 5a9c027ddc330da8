"""Environment generators: stream-tensor, Manhattan, cyclic-loop and
symmetric families.  Every output passes env_core validation by
construction; identical spec + seed reproduces bit-identical fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import lattice, rng
from .environment import Environment
from .spectral import StreamTensor, axis_pairs

FAMILIES = ("stream_tensor", "manhattan", "cyclic", "symmetric")


class GeneratorParameterError(ValueError):
    pass


@dataclass
class GeneratorSpec:
    """Parameters of one environment family.

    clip bounds the flow amplitude: after rescaling, max |v_k| <= clip * s_star
    so all rates stay non-negative with margin.  tail_exponent shapes the
    amplitude law of the stream-tensor plaquette field (inf = bounded,
    finite > 2 = heavy-tailed but square-summable).  correlation_length
    spectrally smooths the Manhattan coin fields before they are balanced.
    """

    family: str
    d: int
    L: int
    seed: int
    s_star: float = 1.0
    s_base: float | None = None     # constant symmetric level; default s_star
    s_jitter: float = 0.0           # site-dependent symmetric part amplitude
    clip: float = 0.9
    amplitude: float = 1.0
    tail_exponent: float = math.inf
    correlation_length: float = 0.0
    cycle_density: float = 0.05
    max_cycle_len: int | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise GeneratorParameterError(f"unknown family {self.family!r}")
        if not (2 <= self.d <= 4):
            raise GeneratorParameterError("dimension must be 2..4")
        if self.L < 8 or (self.L & (self.L - 1)) != 0:
            raise GeneratorParameterError("L must be a power of two >= 8")
        if self.s_base is None:
            self.s_base = self.s_star
        if self.s_base < self.s_star:
            raise GeneratorParameterError("s_base below the ellipticity floor")
        if not (0.0 <= self.clip < 1.0):
            raise GeneratorParameterError("need 0 <= clip < 1 (margin infeasible)")
        if self.s_jitter < 0:
            raise GeneratorParameterError("s_jitter must be >= 0")
        if self.family == "stream_tensor" and not (self.tail_exponent > 2):
            raise GeneratorParameterError("tail_exponent must exceed 2 (or be inf)")
        if self.family == "manhattan" and self.s_base < 1.0:
            raise GeneratorParameterError("manhattan needs s_base >= 1 (unit coins)")
        if self.family == "cyclic":
            if self.cycle_density < 0:
                raise GeneratorParameterError("cycle_density must be >= 0")
            if self.max_cycle_len is not None and self.max_cycle_len > self.L // 2:
                raise GeneratorParameterError("max cycle length above L/2")

    def as_dict(self) -> dict:
        out = asdict(self)
        if math.isinf(out["tail_exponent"]):
            out["tail_exponent"] = "inf"
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorSpec":
        data = dict(data)
        if data.get("tail_exponent") == "inf":
            data["tail_exponent"] = math.inf
        return cls(**data)


def _symmetric_edges(spec: GeneratorSpec) -> np.ndarray:
    """Free edge fields c_a(x) = s_{+e_a}(x) in [s_base, s_base + s_jitter]."""
    shape = (spec.L,) * spec.d
    n = spec.L**spec.d
    edges = np.empty((spec.d,) + shape)
    key = rng.derive_key(spec.seed, spec.family, "sym-edges")
    for a in range(spec.d):
        if spec.s_jitter > 0:
            u = rng.uniform01(key, np.arange(a * n, (a + 1) * n)).reshape(shape)
            edges[a] = spec.s_base + spec.s_jitter * u
        else:
            edges[a] = np.full(shape, spec.s_base)
    return edges


def _assemble(spec: GeneratorSpec, v_pos: np.ndarray, s_edges: np.ndarray,
              tag: str) -> Environment:
    """Build the full 2d-direction rate fields from positive-direction flow
    and symmetric edge fields; antisymmetry and edge symmetry hold exactly
    by storage."""
    d, L = spec.d, spec.L
    rates = np.empty((2 * d,) + (L,) * d)
    for a in range(d):
        s_neg = np.roll(s_edges[a], 1, axis=a)
        v_neg = -np.roll(v_pos[a], 1, axis=a)
        rates[2 * a] = s_edges[a] + v_pos[a]
        rates[2 * a + 1] = s_neg + v_neg
    s_upper = float(np.max(rates))
    return Environment(d, L, rates, spec.s_star, s_upper, tag, spec.seed,
                       {"spec": spec.as_dict()})


def _rescale_to_margin(spec: GeneratorSpec, v_pos: np.ndarray) -> float:
    """Factor bringing max |v| down to clip * s_star (1.0 if already inside)."""
    m = float(np.max(np.abs(v_pos)))
    limit = spec.clip * spec.s_star
    if m <= limit or m == 0.0:
        return 1.0
    return limit / m


def gen_stream_tensor(spec: GeneratorSpec):
    """Sample plaquette amplitudes, take v = curl(h), rescale into the
    margin.  Returns (environment, stream tensor); curl(tensor) equals the
    environment flow bit-for-bit."""
    if spec.family != "stream_tensor":
        raise GeneratorParameterError("spec.family must be 'stream_tensor'")
    d, L = spec.d, spec.L
    shape = (L,) * d
    n = L**d
    pairs = axis_pairs(d)
    key = rng.derive_key(spec.seed, "stream_tensor", "plaquettes")
    comps = np.empty((len(pairs),) + shape)
    for q in range(len(pairs)):
        u = rng.uniform01(key, np.arange(q * n, (q + 1) * n)).reshape(shape)
        sign = np.where(u < 0.5, -1.0, 1.0)
        mag = 2.0 * np.abs(u - 0.5)                   # uniform(0,1), independent of sign
        if math.isinf(spec.tail_exponent):
            comps[q] = spec.amplitude * sign * mag
        else:
            # symmetric Pareto-type tail: P(|a| > u) ~ u^{-beta}
            mag = np.maximum(mag, 1e-300)
            comps[q] = spec.amplitude * sign * (mag ** (-1.0 / spec.tail_exponent) - 1.0)
    tensor = StreamTensor(d, L, comps, "stationary")
    if spec.amplitude == 0.0:
        v = np.zeros((2 * d,) + shape)
    else:
        v = tensor.curl()
        factor = _rescale_to_margin(spec, v[::2])
        if factor != 1.0:
            tensor = tensor.scaled(factor)
            v = tensor.curl()
    env = _assemble(spec, v[::2], _symmetric_edges(spec), "stream_tensor")
    return env, tensor


def _balanced_signs(values: np.ndarray) -> np.ndarray:
    """Rank-balance a scalar field to +-1 with exactly zero sum."""
    flat = values.ravel()
    order = np.argsort(flat, kind="stable")
    out = np.empty(flat.size)
    half = flat.size // 2
    out[order[:half]] = -1.0
    out[order[half:]] = 1.0
    return out.reshape(values.shape)


def gen_manhattan(spec: GeneratorSpec) -> Environment:
    """Randomly oriented Manhattan lattice: each line parallel to axis a
    carries a +-1 orientation coin u_a (a field over the remaining d-1
    coordinates), exactly balanced so the torus has no drift."""
    if spec.family != "manhattan":
        raise GeneratorParameterError("spec.family must be 'manhattan'")
    d, L = spec.d, spec.L
    shape = (L,) * d
    line_shape = (L,) * (d - 1)
    n_lines = L ** (d - 1)
    v_pos = np.empty((d,) + shape)
    for a in range(d):
        key = rng.derive_key(spec.seed, "manhattan", "coins", a)
        if spec.correlation_length > 0:
            half = rng.normal(key, np.arange(n_lines)).reshape(line_shape)
            lam = np.zeros(line_shape)
            p = 2.0 * np.pi * np.fft.fftfreq(L)
            for ax in range(d - 1):
                sl = [1] * (d - 1)
                sl[ax] = L
                lam = lam + 2.0 * (1.0 - np.cos(p.reshape(sl)))
            envelope = np.exp(-0.5 * spec.correlation_length**2 * lam)
            smooth = np.fft.ifftn(np.fft.fftn(half) * envelope).real
            coins = _balanced_signs(smooth)
        else:
            coins = _balanced_signs(rng.uniform01(key, np.arange(n_lines)).reshape(line_shape))
        v_pos[a] = np.expand_dims(coins, axis=a)      # constant along axis a
    return _assemble(spec, v_pos, _symmetric_edges(spec), "manhattan")


def gen_cyclic(spec: GeneratorSpec) -> Environment:
    """Superposition of oriented rectangular loops with random positions,
    plane orientations and weights; sourceless by construction."""
    if spec.family != "cyclic":
        raise GeneratorParameterError("spec.family must be 'cyclic'")
    d, L = spec.d, spec.L
    shape = (L,) * d
    n = L**d
    max_len = spec.max_cycle_len or max(1, L // 4)
    n_loops = int(round(spec.cycle_density * n))
    v_pos = np.zeros((d,) + shape)
    pairs = axis_pairs(d)
    key = rng.derive_key(spec.seed, "cyclic", "loops")
    for m in range(n_loops):
        base = 8 * m
        corner = lattice.site_coords(rng.integers(key, base + 0, n), d, L)
        pa, pb = pairs[int(rng.integers(key, base + 1, len(pairs)))]
        orient = 1.0 if int(rng.integers(key, base + 2, 2)) == 0 else -1.0
        len_a = 1 + int(rng.integers(key, base + 3, max_len))
        len_b = 1 + int(rng.integers(key, base + 4, max_len))
        w = orient * spec.amplitude * float(rng.uniform(key, base + 5, 0.25, 1.0))
        ts = np.arange(len_a)
        us = np.arange(len_b)
        # oriented rectangle in the (pa, pb) plane anchored at `corner`
        bottom = np.repeat(corner[None, :], len_a, axis=0)
        bottom[:, pa] = (bottom[:, pa] + ts) % L
        top = bottom.copy()
        top[:, pb] = (top[:, pb] + len_b) % L
        left = np.repeat(corner[None, :], len_b, axis=0)
        left[:, pb] = (left[:, pb] + us) % L
        right = left.copy()
        right[:, pa] = (right[:, pa] + len_a) % L
        np.add.at(v_pos[pa], tuple(bottom.T), w)
        np.add.at(v_pos[pb], tuple(right.T), w)
        np.subtract.at(v_pos[pa], tuple(top.T), w)
        np.subtract.at(v_pos[pb], tuple(left.T), w)
    factor = _rescale_to_margin(spec, v_pos)
    if factor != 1.0:
        v_pos = v_pos * factor
    return _assemble(spec, v_pos, _symmetric_edges(spec), "cyclic")


def gen_symmetric(spec: GeneratorSpec) -> Environment:
    """Zero-flow baseline: p_k = s_k with the edge symmetry; v = 0."""
    if spec.family != "symmetric":
        raise GeneratorParameterError("spec.family must be 'symmetric'")
    v_pos = np.zeros((spec.d,) + (spec.L,) * spec.d)
    return _assemble(spec, v_pos, _symmetric_edges(spec), "symmetric")


def generate(spec: GeneratorSpec) -> Environment:
    """Dispatch on family; the stream-tensor family drops its tensor."""
    if spec.family == "stream_tensor":
        env, _ = gen_stream_tensor(spec)
        return env
    if spec.family == "manhattan":
        return gen_manhattan(spec)
    if spec.family == "cyclic":
        return gen_cyclic(spec)
    return gen_symmetric(spec)
