import numpy as np
import pytest

from rwre import environment as envm
from rwre import estimators as est
from rwre import generators as gen
from rwre import spectral, walker as wk
from rwre.resolvent import build_operators, corrector_diffusivity
from _oracles import symmetric_lazy_kernel_fft


def test_msd_requires_enough_paths():
    with pytest.raises(ValueError):
        est.msd_diffusivity(np.zeros((100, 2)), 10.0)


def test_msd_on_synthetic_gaussian_data():
    rng = np.random.default_rng(0)
    cov = np.array([[2.0, 0.3], [0.3, 1.5]])
    t = 50.0
    X = rng.multivariate_normal([0, 0], cov * t, size=20000)
    m = est.msd_diffusivity(X, t)
    assert m.within(cov)
    # jackknife SE close to the analytic SE of a normal variance estimate
    analytic = cov[0, 0] * np.sqrt(2.0 / (20000 - 1))
    assert 0.8 < m.se[0, 0] / analytic < 1.2


def test_msd_flags_preasymptotic_horizon():
    X = np.random.default_rng(1).standard_normal((2000, 2))
    m = est.msd_diffusivity(X, 1.0, njumps=np.full(2000, 3))
    assert m.few_jumps


def test_bounds_check_symmetric_lower_bound_is_tight(symmetric_env):
    dec = envm.decompose(symmetric_env)
    oracle = corrector_diffusivity(build_operators(dec), dec)
    zero = np.zeros((2, 2))
    rep = est.bounds_check(oracle.sigma2, symmetric_env.s_star,
                           symmetric_env.s_upper, zero, zero)
    assert rep.all_pass
    assert np.max(np.abs(rep.values - rep.lower)) < 1e-12


def test_bounds_check_detects_corrupted_sigma(stream_dec):
    oracle = corrector_diffusivity(build_operators(stream_dec), stream_dec)
    h1 = spectral.h1_functional(stream_dec)
    good = est.bounds_check(oracle.sigma2, stream_dec.s_star,
                            stream_dec.s_upper, h1.ctilde, h1.dtilde)
    assert good.all_pass
    bad = est.bounds_check(oracle.sigma2 / 2.0, stream_dec.s_star,
                           stream_dec.s_upper, h1.ctilde, h1.dtilde)
    assert not bad.all_pass
    assert not np.all(bad.lower_ok)


def test_bounds_check_over_random_stream_envs():
    for seed in range(5):
        env, _ = gen.gen_stream_tensor(
            gen.GeneratorSpec("stream_tensor", d=2, L=8, seed=seed,
                              s_jitter=0.4))
        dec = envm.decompose(env)
        oracle = corrector_diffusivity(build_operators(dec), dec)
        h1 = spectral.h1_functional(dec)
        rep = est.bounds_check(oracle.sigma2, env.s_star, env.s_upper,
                               h1.ctilde, h1.dtilde)
        assert rep.all_pass


def test_clt_preasymptotic_flag_and_singular_refusal():
    X = np.random.default_rng(2).standard_normal((5000, 2))
    rep = est.clt_diagnostics(X, np.eye(2), 1.0, njumps=np.full(5000, 2))
    assert rep.preasymptotic and rep.passes()
    with pytest.raises(ValueError):
        est.clt_diagnostics(X, np.zeros((2, 2)), 1.0)


def test_clt_on_exact_gaussian_samples():
    rng = np.random.default_rng(3)
    sigma2 = np.array([[2.0, 0.4], [0.4, 3.0]])
    X = rng.multivariate_normal([0, 0], sigma2 * 100.0, size=10000)
    rep = est.clt_diagnostics(X, sigma2, 100.0,
                              midpoints=X / 2 + rng.multivariate_normal(
                                  [0, 0], sigma2 * 25.0, size=10000))
    assert rep.passes(0.02)
    assert np.max(np.abs(rep.skewness)) < 0.1
    assert np.max(np.abs(rep.excess_kurtosis)) < 0.15


def test_heat_kernel_matches_fft_convolution_oracle(symmetric_env):
    env = gen.gen_symmetric(gen.GeneratorSpec("symmetric", d=2, L=32, seed=1))
    aux = wk.auxiliary_env(env)
    profile = est.heat_kernel_profile(aux, 32)
    for n in (4, 16, 32):
        oracle = symmetric_lazy_kernel_fft(32, 2, n)
        assert abs(profile.a_n[n - 1] - n * oracle.max()) < 1e-12
    # bounded and approaching the local-CLT constant 2/pi from above
    assert profile.a_n[-1] == pytest.approx(2.0 / np.pi, rel=0.01)
    assert profile.peak < 0.7


def test_heat_kernel_refuses_wrap_horizon(symmetric_env):
    aux = wk.auxiliary_env(symmetric_env)   # L = 8: horizon (L/4)^2 = 4
    with pytest.raises(ValueError):
        est.heat_kernel_profile(aux, 5)
    profile = est.heat_kernel_profile(aux, 4)
    assert profile.n[0] == 1                # the zero-step kernel is excluded


def test_edge_cut_identity_single_site_and_random_sets(manhattan_env):
    aux = wk.auxiliary_env(manhattan_env)
    L = aux.L
    single = np.zeros((L, L), dtype=bool)
    single[3, 4] = True
    assert est.edge_cut_identity(aux, [single])[0] <= 1e-15
    masks = [est.random_connected_set(2, L, 18, seed=s) for s in range(20)]
    resid = est.edge_cut_identity(aux, masks)
    assert np.max(resid) <= 1e-12


def test_edge_cut_identity_across_families(stream_env, cyclic_env):
    for base in (stream_env[0], cyclic_env):
        aux = wk.auxiliary_env(base)
        masks = [est.random_connected_set(2, base.L, 12, seed=s)
                 for s in range(5)]
        assert np.max(est.edge_cut_identity(aux, masks)) <= 1e-12


def test_edge_cut_refuses_wrapping_sets(manhattan_env):
    aux = wk.auxiliary_env(manhattan_env)
    wrap = np.zeros((aux.L,) * 2, dtype=bool)
    wrap[:, 2] = True                        # a full column wraps the torus
    with pytest.raises(ValueError):
        est.edge_cut_identity(aux, [wrap])


def test_edge_cut_box_isoperimetric_ratio(manhattan_env):
    # b x b box: Q = |dS| / (4d) = 4b / 8 = b/2 and |S|^{(d-1)/d} = b,
    # so the isoperimetric ratio is exactly 1/2
    from rwre import lattice
    aux = wk.auxiliary_env(manhattan_env)
    L = aux.L
    b = L // 4
    box = np.zeros((L, L), dtype=bool)
    box[1:1 + b, 1:1 + b] = True
    V = est.lazy_flow_fields(aux)
    q = 0.0
    for j in range(4):
        cut = box & ~lattice.shift(box, j)
        q += float(np.sum(1.0 + V[j][cut])) / 8.0
    ratio = q / (b * b) ** 0.5
    assert ratio == pytest.approx(0.5, abs=1e-12)


def test_scenery_variance_trivial_and_match(stream_dec, symmetric_env):
    dec_sym = envm.decompose(symmetric_env)
    r = est.scenery_variance_check(dec_sym,
                                   wk.scenery_integral(dec_sym, 10.0, 1000, 1),
                                   10.0)
    assert r["mc"] == 0.0 and r["oracle"] == 0.0
    T = 100.0
    samples = wk.scenery_integral(stream_dec, T, 6000, seed=21)
    r = est.scenery_variance_check(stream_dec, samples, T)
    assert r["within"], r
    assert r["oracle"] < r["oracle_infinite_horizon"]


def test_scenery_oracle_diverges_for_manhattan():
    # the variance rate keeps growing with the horizon inside the torus
    # window (saturation only at T ~ gap^{-1} ~ L^2)
    dec = envm.decompose(gen.gen_manhattan(
        gen.GeneratorSpec("manhattan", d=2, L=64, seed=9)))
    v25, _ = est.scenery_variance_oracle(dec, 25.0)
    v100, _ = est.scenery_variance_oracle(dec, 100.0)
    v400, _ = est.scenery_variance_oracle(dec, 400.0)
    assert v100 > 1.5 * v25 and v400 > 1.3 * v100


def test_standard_error_halves_with_quadrupled_paths(stream_dec):
    env, _ = gen.gen_stream_tensor(
        gen.GeneratorSpec("stream_tensor", d=2, L=16, seed=5, s_jitter=0.5))
    small = wk.run_ct_ensemble(env, 2000, 60.0, seed=9)
    big = wk.run_ct_ensemble(env, 8000, 60.0, seed=9)
    se_small = est.msd_diffusivity(small["X"], 60.0).se
    se_big = est.msd_diffusivity(big["X"], 60.0).se
    ratio = se_small / se_big
    assert np.all(ratio > 1.6) and np.all(ratio < 2.4)
