import dataclasses

import numpy as np
import pytest

from rwre import environment as envm
from rwre import generators as gen
from rwre import spectral, walker as wk
from rwre import resolvent as res
from rwre.estimators import msd_diffusivity
from _oracles import annealed_variance_ode


def probe(bundle, seed=0):
    f = np.random.default_rng(seed).standard_normal(bundle.n_sites)
    return f - f.mean()


@pytest.fixture(scope="module")
def stream_bundle():
    env, _ = gen.gen_stream_tensor(
        gen.GeneratorSpec("stream_tensor", d=2, L=8, seed=5, s_jitter=0.5))
    dec = envm.decompose(env)
    return env, dec, res.build_operators(dec)


def test_generator_decomposition_identity(stream_bundle):
    _, _, b = stream_bundle
    for seed in range(5):
        f = probe(b, seed)
        lhs = b.apply_L(f)
        rhs = -b.apply_D(f) - b.apply_T(f) + b.apply_A(f)
        assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_dual_forms_and_symmetries(stream_bundle):
    _, _, b = stream_bundle
    for seed in range(10):
        f, g = probe(b, 2 * seed), probe(b, 2 * seed + 1)
        assert np.max(np.abs(b.apply_A(f) - b.apply_A_dual(f))) < 1e-12
        assert np.max(np.abs(b.apply_T(f) - b.apply_T_dual(f))) < 1e-12
        # A skew, D and T symmetric PSD
        assert abs(np.dot(f, b.apply_A(g)) + np.dot(b.apply_A(f), g)) < 1e-10
        assert np.dot(f, b.apply_D(f)) >= -1e-12
        assert np.dot(f, b.apply_T(f)) >= -1e-12
        # Dirichlet bound <f, -L f> >= s_star <f, |Delta| f>
        lap = -spectral.apply_laplacian(f.reshape(8, 8)).reshape(-1)
        assert np.dot(f, -b.apply_L(f)) >= b.s_star * np.dot(f, lap) - 1e-10


def test_trivial_operator_cases(symmetric_env):
    dec = envm.decompose(symmetric_env)
    b = res.build_operators(dec)
    f = probe(b, 3)
    assert np.max(np.abs(b.apply_A(f))) == 0.0          # v = 0
    assert np.max(np.abs(b.apply_T(f))) == 0.0          # s = s_star
    assert np.max(np.abs(b.apply_L(f) + b.apply_D(f))) < 1e-12


def test_build_refuses_floor_violation(stream_bundle):
    _, dec, _ = stream_bundle
    with pytest.raises(ValueError):
        res.build_operators(dec, s_star=dec.s_star * 1.5)


def test_resolvent_solve_on_fourier_mode(symmetric_env):
    # L = s_star * Delta for the constant symmetric walk: single modes are
    # eigenvectors with eigenvalue -s_star * lam(p)
    dec = envm.decompose(symmetric_env)
    b = res.build_operators(dec)
    L = symmetric_env.L
    x = np.arange(L)
    p1, p2 = 2 * np.pi * 1 / L, 2 * np.pi * 3 / L
    mode = np.cos(np.add.outer(p1 * x, p2 * x)).reshape(-1)
    lam_sym = 2 * (1 - np.cos(p1)) + 2 * (1 - np.cos(p2))
    for lam in (0.0, 0.25, 1.0):
        sol = res.solve_resolvent(b, mode, lam)
        expected = mode / (lam + b.s_star * lam_sym)
        assert np.max(np.abs(sol.u - expected)) < 1e-10


def test_resolvent_residual_contract(stream_bundle):
    _, _, b = stream_bundle
    f = probe(b, 7)
    for lam in (0.0, 2.0**-12, 1.0):
        sol = res.solve_resolvent(b, f, lam)
        assert sol.residual <= 1e-10


def test_resolvent_ladder_converges_to_lambda_zero(stream_bundle):
    _, dec, b = stream_bundle
    f = (dec.phi[0] + dec.psi[0]).reshape(-1)
    u0 = res.solve_resolvent(b, f, 0.0).u
    ip0 = float(np.mean(u0 * f))
    ips = []
    for j in range(0, 25, 4):
        u = res.solve_resolvent(b, f, 2.0**-j).u
        ips.append(float(np.mean(u * f)))
    gaps = np.abs(np.asarray(ips) - ip0)
    assert np.all(np.diff(gaps) < 1e-14)
    assert gaps[-1] < 1e-8


def test_direct_fallback_agrees_with_gmres(stream_bundle):
    _, _, b = stream_bundle
    f = probe(b, 11)
    sol = res.solve_resolvent(b, f, 0.0)
    mat = -b.sparse_L()
    u_direct = res._solve_pinned(mat.tocsr(), f)
    u_direct -= u_direct.mean()
    assert np.max(np.abs(sol.u - u_direct)) < 1e-8


def test_corrector_symmetric_baseline_exact():
    env = gen.gen_symmetric(gen.GeneratorSpec("symmetric", d=2, L=8, seed=1))
    dec = envm.decompose(env)
    oracle = res.corrector_diffusivity(res.build_operators(dec), dec)
    assert np.max(np.abs(oracle.sigma2 - 2.0 * np.eye(2))) <= 1e-12


def test_corrector_matches_master_equation_oracle():
    # independent arbiter: exact annealed averaged second moment by ODE
    for family, kwargs in [("stream_tensor", dict(s_jitter=0.5)),
                           ("cyclic", dict(cycle_density=0.1))]:
        spec = gen.GeneratorSpec(family, d=2, L=8, seed=42, **kwargs)
        env = gen.generate(spec)
        dec = envm.decompose(env)
        oracle = res.corrector_diffusivity(res.build_operators(dec), dec)
        for a in range(2):
            v = np.eye(2)[a]
            ode = annealed_variance_ode(env, v, 600.0)
            assert abs(oracle.sigma2[a, a] - ode) < 5e-3 * oracle.sigma2[a, a]


def test_corrector_harmonicity(stream_bundle):
    _, dec, b = stream_bundle
    oracle = res.corrector_diffusivity(b, dec)
    for i in range(2):
        g = (dec.phi[i] + dec.psi[i]).reshape(-1)
        assert np.max(np.abs(b.apply_L(oracle.correctors[i]) + g)) < 1e-9


def test_corrector_invariant_under_translation(stream_bundle):
    env, dec, b = stream_bundle
    oracle = res.corrector_diffusivity(b, dec)
    env2 = env.translated((2, 5))
    dec2 = envm.decompose(env2)
    oracle2 = res.corrector_diffusivity(res.build_operators(dec2), dec2)
    assert np.max(np.abs(oracle.sigma2 - oracle2.sigma2)) < 1e-10


def test_corrector_psd_and_bounds(stream_bundle):
    env, dec, b = stream_bundle
    sigma2 = res.corrector_diffusivity(b, dec).sigma2
    w = np.linalg.eigvalsh(sigma2)
    assert w.min() >= 2 * env.s_star - 1e-10
    assert np.max(np.abs(sigma2 - sigma2.T)) < 1e-12


def test_corrector_matches_monte_carlo(stream_bundle):
    env, dec, b = stream_bundle
    oracle = res.corrector_diffusivity(b, dec)
    out = wk.run_ct_ensemble(env, 6000, 300.0, seed=77)
    m = msd_diffusivity(out["X"], 300.0, out["njumps"])
    assert m.within(oracle.sigma2)


def test_sector_checks_pass_and_detect_violation(stream_bundle):
    _, _, b = stream_bundle
    rep = res.sector_checks(b, n_probe=8)
    assert rep.passes(1e-10)
    assert rep.min_eig_cd_minus_t >= -1e-10
    assert rep.dtd_norm <= rep.constant
    # artificially inflate T beyond the sector constant: violation detected
    factor = 4.0 * rep.constant * b.s_star / max(float(b.ns.max()), 1e-12)
    bad = dataclasses.replace(b, ns=b.ns * factor, _cache={})
    bad_rep = res.sector_checks(bad, n_probe=4)
    assert bad_rep.min_eig_cd_minus_t < -1e-6


def test_sector_trivial_symmetric(symmetric_env):
    dec = envm.decompose(symmetric_env)
    rep = res.sector_checks(res.build_operators(dec), n_probe=4)
    assert rep.passes(1e-10)
    assert rep.dtd_norm <= 1e-10          # T = 0


def test_kv_limits_symmetric_against_dirichlet_form():
    # v = 0: the generator is symmetric, so sigma2 = 2 <f, S^{-1} f>
    env = gen.gen_symmetric(gen.GeneratorSpec("symmetric", d=2, L=8, seed=6,
                                              s_jitter=0.5))
    dec = envm.decompose(env)
    b = res.build_operators(dec)
    f = dec.psi[0].reshape(-1)
    rep = res.kv_limits_check(b, f, 2.0 ** -np.arange(0, 25, 3))
    w = res.solve_symmetric(b, f)
    dirichlet = 2.0 * float(np.mean(f * w))
    assert abs(rep.sigma2_kv - dirichlet) < 1e-8
    assert rep.sigma2_kv >= 0.0


def test_kv_limit_conditions_and_bounds(stream_bundle):
    env, dec, b = stream_bundle
    h1 = spectral.h1_functional(dec)
    lambdas = 2.0 ** -np.arange(0, 25)
    for a in range(2):
        rep = res.kv_limits_check(b, dec.phi[a], lambdas)
        assert rep.lam_u_norm_sq[-1] < 1e-6
        assert rep.tail_decreasing()
        assert rep.sigma2_kv >= 0.0
        assert rep.sigma2_kv <= 8.0 / env.s_star * h1.ctilde[a, a] + 1e-12
        assert rep.sigma2_kv <= rep.olla_bound + 1e-12


def test_kv_matches_monte_carlo_time_average(stream_bundle):
    env, dec, b = stream_bundle
    rep = res.kv_limits_check(b, dec.phi[0], 2.0 ** -np.arange(0, 21, 4))
    T, P = 400.0, 6000
    out = wk.run_ct_ensemble(env, P, T, seed=55, fields=[dec.phi[0]])
    samples = out["F"][:, 0]
    var_rate = float(np.var(samples, ddof=1)) / T
    se = float(np.std(samples**2, ddof=1)) / np.sqrt(P) / T
    assert abs(var_rate - rep.sigma2_kv) <= 3 * se


def test_rsc_suite_trivial_when_flow_vanishes(symmetric_env):
    dec = envm.decompose(symmetric_env)
    b = res.build_operators(dec)
    rep = res.rsc_operator_suite(b, lambdas=[1.0, 2.0**-8], n_vectors=4)
    for e in rep.entries:
        assert e.c_skew_residual == 0.0
        assert abs(e.k_norm - 1.0) < 1e-12
    assert rep.norm_bounds_hold()


def test_rsc_suite_bounds_and_convergence():
    for seed in (1, 2, 3):
        env, _ = gen.gen_stream_tensor(
            gen.GeneratorSpec("stream_tensor", d=2, L=8, seed=seed,
                              s_jitter=0.3))
        dec = envm.decompose(env)
        b = res.build_operators(dec)
        rep = res.rsc_operator_suite(b, lambdas=2.0 ** -np.arange(0, 25, 4),
                                     n_vectors=8)
        assert rep.norm_bounds_hold(1e-10)
        assert rep.factorization_holds(1e-8)
        assert rep.b_convergent()
        assert rep.entries[-1].b_convergence_err < 1e-5
        assert all(e.v_inv_norm <= np.sqrt(1 + rep.constant) + 1e-10
                   for e in rep.entries)


def test_rsc_refuses_oversized_problems():
    env, _ = gen.gen_stream_tensor(
        gen.GeneratorSpec("stream_tensor", d=2, L=128, seed=1))
    dec = envm.decompose(env)
    b = res.build_operators(dec)
    with pytest.raises(ValueError):
        b.dense("L")
    with pytest.raises(ValueError):
        res.rsc_operator_suite(b)
