"""Command-line front end: generation, validation, spectral reports,
simulation, estimation, resolvent suites, heat-kernel profiles, and the
full experiment pipeline with deterministic seed management.

All randomness in a pipeline run derives from the master seed and the stage
name, so a config file fully determines every output (reports are
byte-stable apart from their timestamp field).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__, estimators, rng, spectral, walker
from .environment import (decompose, load_environment, save_environment, validate)
from .generators import GeneratorSpec, generate
from .resolvent import (build_operators, corrector_diffusivity, kv_limits_check,
                        rsc_operator_suite, sector_checks)

CONFIG_SCHEMA_VERSION = 1

_CONFIG_KEYS = {"schema_version", "master_seed", "out_dir", "generator", "stages"}
_STAGE_KEYS = {
    "validate": set(),
    "spectral": {"growth_check"},
    "simulate": {"paths", "horizon", "tracks"},
    "estimate": {"checks", "ks_threshold"},
    "resolvent": {"suites", "ladder"},
    "heatkernel": {"n_max"},
}


def _apply_thread_cap():
    cap = os.environ.get("RWRE_THREADS")
    if not cap:
        return
    try:
        n = max(1, int(cap))
    except ValueError:
        return
    try:
        import numba
        numba.set_num_threads(min(n, numba.get_num_threads()))
    except ImportError:
        pass


def stage_seed(master_seed: int, stage: str) -> int:
    return rng.derive_key(master_seed, stage) & ((1 << 62) - 1)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _gen_spec_from_args(args) -> GeneratorSpec:
    kwargs = dict(family=args.family, d=args.d, L=args.L, seed=args.seed,
                  s_star=args.s_star, clip=args.clip, amplitude=args.amplitude,
                  s_jitter=args.s_jitter,
                  correlation_length=args.correlation_length,
                  cycle_density=args.cycle_density)
    if args.s_base is not None:
        kwargs["s_base"] = args.s_base
    if args.tail_exponent is not None:
        kwargs["tail_exponent"] = (math.inf if args.tail_exponent in ("inf", "")
                                   else float(args.tail_exponent))
    if args.max_cycle_len is not None:
        kwargs["max_cycle_len"] = args.max_cycle_len
    return GeneratorSpec(**kwargs)


def cmd_gen(args) -> int:
    spec = _gen_spec_from_args(args)
    env = generate(spec)
    save_environment(env, args.out)
    report = validate(env)
    print(f"wrote {args.out}: family={spec.family} d={spec.d} L={spec.L} "
          f"seed={spec.seed} s*={env.s_upper:.4g} "
          f"validation={'pass' if report.passed else 'FAIL'}")
    return 0 if report.passed else 1


def cmd_validate(args) -> int:
    env = load_environment(args.infile)
    report = validate(env)
    print(report.summary())
    if args.json:
        payload = {name: {"residual": c.residual, "tolerance": c.tolerance,
                          "passed": c.passed, "worst_site": list(c.worst_site)}
                   for name, c in report.checks.items()}
        _write_json(args.json, payload)
    return 0 if report.passed else 1


def cmd_spectral(args) -> int:
    env = load_environment(args.infile)
    dec = decompose(env)
    h1 = spectral.h1_functional(dec)
    kz = spectral.kozlov_regularity(dec)
    tensor = spectral.helmholtz_stationary(dec)
    curl_residual = float(np.max(np.abs(tensor.curl() - dec.v)))
    payload = {
        "ctilde": h1.ctilde.tolist(),
        "dtilde": h1.dtilde.tolist(),
        "trace_ctilde": h1.trace_c,
        "trace_dtilde": h1.trace_d,
        "helmholtz_curl_residual": curl_residual,
        "kozlov": {
            "vector_residual": kz.vector_residual,
            "divergence_residual": kz.divergence_residual,
            "quadratic_form_residual": kz.quadratic_form_residual,
            "fit_coefficient": kz.fit_coefficient,
            "identities_pass": kz.identities_pass,
        },
    }
    _write_json(args.report, payload)
    print(f"trace Ctilde = {h1.trace_c:.6g}, trace Dtilde = {h1.trace_d:.6g}, "
          f"curl residual = {curl_residual:.3e}")
    if args.csv:
        spec_cov = spectral.covariance_spectrum(dec)
        tr = spec_cov.C_trace().real
        lam = spectral.laplacian_symbol(env.d, env.L)
        grids = np.meshgrid(*[2 * np.pi * np.fft.fftfreq(env.L)] * env.d,
                            indexing="ij")
        p2 = sum(g**2 for g in grids)
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p_squared", "lambda_symbol", "chat_trace"])
            order = np.argsort(p2.ravel())
            for idx in order:
                w.writerow([f"{p2.ravel()[idx]:.12g}", f"{lam.ravel()[idx]:.12g}",
                            f"{tr.ravel()[idx]:.12g}"])
    return 0


def cmd_simulate(args) -> int:
    env = load_environment(args.infile)
    dec = decompose(env)
    tracks = [t for t in (args.tracks.split(",") if args.tracks else []) if t]
    cols = {}
    out = walker.run_mi_ensemble(env, dec, args.paths, args.horizon, args.seed)
    X, njumps = out["X"], out["njumps"]
    d = env.d
    for a in range(d):
        cols[f"X{a + 1}"] = X[:, a]
    if "mi" in tracks:
        for a in range(d):
            cols[f"M{a + 1}"] = out["M"][:, a]
            cols[f"I{a + 1}"] = out["I"][:, a]
    if "klj" in tracks:
        klj = walker.run_klj_ensemble(env, dec, args.paths, args.horizon,
                                      args.seed, stage_seed(args.seed, "coins"))
        for a in range(d):
            cols[f"K{a + 1}"] = klj["K"][:, a]
            cols[f"L{a + 1}"] = klj["L"][:, a]
            cols[f"J{a + 1}"] = klj["J"][:, a]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["path", "t", "njumps"] + list(cols)
        w.writerow(header)
        for p in range(args.paths):
            w.writerow([p, args.horizon, int(njumps[p])]
                       + [f"{cols[c][p]:.12g}" for c in cols])
    if args.store_paths:
        cap = min(args.paths, 64)
        bundles = {}
        for p in range(cap):
            traj = walker.simulate_ct(env, 0, args.horizon, args.seed, path_index=p)
            bundles[f"times_{p}"] = traj.times
            bundles[f"dirs_{p}"] = traj.dirs
        np.savez_compressed(args.store_paths, n_paths=cap, **bundles)
    print(f"wrote {args.out}: {args.paths} paths, horizon {args.horizon}, "
          f"mean jumps {float(njumps.mean()):.1f}")
    return 0


def _read_summary(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    names = data.dtype.names
    d = max(int(n[1:]) for n in names if n.startswith("X"))
    X = np.stack([data[f"X{a + 1}"] for a in range(d)], axis=1)
    t = float(data["t"][0])
    njumps = data["njumps"]
    return X, t, njumps, data


def cmd_estimate(args) -> int:
    X, t, njumps, _ = _read_summary(args.infile)
    est = estimators.msd_diffusivity(X, t, njumps)
    payload = {
        "sigma2_hat": est.sigma2.tolist(),
        "se": est.se.tolist(),
        "paths": est.n,
        "t": est.t,
        "few_jumps_warning": est.few_jumps,
    }
    status = 0
    if args.oracle:
        with open(args.oracle) as fh:
            oracle = json.load(fh)
        sigma2_ref = np.asarray(oracle["sigma2"])
        payload["oracle_sigma2"] = sigma2_ref.tolist()
        payload["within_3se_of_oracle"] = est.within(sigma2_ref)
        clt = estimators.clt_diagnostics(X, sigma2_ref, t, njumps=njumps)
        payload["clt"] = {
            "ks_distance": clt.ks_distance.tolist(),
            "skewness": clt.skewness.tolist(),
            "excess_kurtosis": clt.excess_kurtosis.tolist(),
            "preasymptotic": clt.preasymptotic,
        }
        if not payload["within_3se_of_oracle"]:
            status = 1
    _write_json(args.report, payload)
    print(f"sigma2_hat = {est.sigma2.tolist()}")
    return status


def cmd_resolvent(args) -> int:
    env = load_environment(args.infile)
    dec = decompose(env)
    bundle = build_operators(dec)
    lambdas = 2.0 ** -np.arange(0, args.ladder + 1)
    payload = {"suite": args.suite}
    status = 0
    if args.suite == "corrector":
        oracle = corrector_diffusivity(bundle, dec)
        payload["sigma2"] = oracle.sigma2.tolist()
        payload["solver_residuals"] = oracle.residuals.tolist()
        print(f"sigma2 oracle = {oracle.sigma2.tolist()}")
    elif args.suite == "kv":
        entries = {}
        for label, fields in (("phi", dec.phi), ("psi", dec.psi)):
            for a in range(env.d):
                rep = kv_limits_check(bundle, fields[a], lambdas)
                entries[f"{label}{a + 1}"] = {
                    "lambdas": rep.lambdas.tolist(),
                    "sqrt_lam_u_norm": rep.sqrt_lam_u_norm.tolist(),
                    "lam_u_norm_sq": rep.lam_u_norm_sq.tolist(),
                    "s_half_gap": rep.s_half_gap.tolist(),
                    "sigma2_kv": rep.sigma2_kv,
                    "olla_bound": rep.olla_bound,
                }
        payload["kv"] = entries
        print(f"kv suite over {len(entries)} drift components")
    elif args.suite == "rsc":
        sector = sector_checks(bundle)
        rep = rsc_operator_suite(bundle, lambdas[::4])
        payload["sector"] = {
            "constant": sector.constant,
            "min_eig_cd_minus_t": sector.min_eig_cd_minus_t,
            "dtd_norm": sector.dtd_norm,
            "gamma_resolution_residual": sector.gamma_resolution_residual,
        }
        payload["rsc"] = [{
            "lambda": e.lam, "k_norm": e.k_norm, "v_norm": e.v_norm,
            "v_inv_norm": e.v_inv_norm,
            "c_skew_residual": e.c_skew_residual,
            "b_skew_residual": e.b_skew_residual,
            "factorization_residual": e.factorization_residual,
            "b_convergence_err": e.b_convergence_err,
        } for e in rep.entries]
        ok = rep.norm_bounds_hold() and rep.factorization_holds() and sector.passes()
        payload["all_bounds_hold"] = bool(ok)
        status = 0 if ok else 1
        print(f"rsc suite: bounds {'hold' if ok else 'VIOLATED'}")
    else:
        raise SystemExit(f"unknown suite {args.suite!r}")
    _write_json(args.out, payload)
    return status


def cmd_heatkernel(args) -> int:
    env = load_environment(args.infile)
    profile = estimators.heat_kernel_profile(env, args.nmax)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "a_n"])
        for n, a in zip(profile.n, profile.a_n):
            w.writerow([int(n), f"{a:.12g}"])
    print(f"wrote {args.out}: peak a_n = {profile.peak:.6g}")
    return 0


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------

def load_config(path) -> dict:
    with open(path) as fh:
        config = json.load(fh)
    return check_config(config)


def check_config(config: dict) -> dict:
    unknown = set(config) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if config.get("schema_version") != CONFIG_SCHEMA_VERSION:
        raise ValueError("config schema_version must be "
                         f"{CONFIG_SCHEMA_VERSION}")
    for name in ("master_seed", "generator", "stages"):
        if name not in config:
            raise ValueError(f"config missing {name!r}")
    for stage, body in config["stages"].items():
        if stage not in _STAGE_KEYS:
            raise ValueError(f"unknown stage {stage!r}")
        bad = set(body) - _STAGE_KEYS[stage]
        if bad:
            raise ValueError(f"unknown keys in stage {stage!r}: {sorted(bad)}")
    return config


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def run_experiment(config: dict, out_dir=None, timestamp=None) -> dict:
    """Execute requested stages in dependency order; every numeric claim is
    tagged with its producing stage, seed and tolerance.  Stage failures
    halt dependents but independent stages still run."""
    config = check_config(config)
    master = int(config["master_seed"])
    stages = config["stages"]
    out_dir = out_dir or config.get("out_dir")
    report = {
        "toolkit_version": __version__,
        "config_hash": config_hash(config),
        "timestamp": timestamp if timestamp is not None else time.strftime(
            "%Y-%m-%dT%H:%M:%S"),
        "stages": {},
        "claims": [],
    }
    claims = report["claims"]

    def claim(stage, name, value, passed, tolerance=None, seed=None):
        claims.append({"stage": stage, "name": name, "value": value,
                       "tolerance": tolerance, "seed": seed,
                       "pass": bool(passed)})

    gen_cfg = dict(config["generator"])
    gen_cfg.setdefault("seed", stage_seed(master, "generate"))
    spec = GeneratorSpec.from_dict(gen_cfg)
    env = generate(spec)
    report["stages"]["generate"] = {"spec": spec.as_dict(),
                                    "s_upper": env.s_upper}

    vrep = validate(env)
    if "validate" in stages:
        for name, c in vrep.checks.items():
            claim("validate", name, c.residual, c.passed, c.tolerance)
        report["stages"]["validate"] = {"passed": vrep.passed}
    if not vrep.passed:
        report["passed"] = False
        return _finish_report(report, out_dir)

    dec = decompose(env, check=False)
    h1 = None
    if "spectral" in stages:
        h1 = spectral.h1_functional(dec)
        kz = spectral.kozlov_regularity(dec)
        tensor = spectral.helmholtz_stationary(dec)
        curl_res = float(np.max(np.abs(tensor.curl() - dec.v)))
        claim("spectral", "helmholtz_curl_residual", curl_res,
              curl_res <= 1e-10, 1e-10)
        claim("spectral", "kozlov_identities",
              max(kz.vector_residual, kz.divergence_residual,
                  kz.quadratic_form_residual), kz.identities_pass, 1e-10)
        body = {"trace_ctilde": h1.trace_c, "trace_dtilde": h1.trace_d,
                "ctilde": h1.ctilde.tolist(), "dtilde": h1.dtilde.tolist(),
                "kozlov_fit": kz.fit_coefficient}
        if stages["spectral"].get("growth_check"):
            def regen(L2):
                s2 = GeneratorSpec.from_dict({**spec.as_dict(), "L": L2})
                return decompose(generate(s2), check=False)
            h1 = spectral.h1_functional(dec, regenerate=regen)
            body["growth_ratio"] = h1.growth_ratio
            body["finite_flag"] = h1.finite_flag
        report["stages"]["spectral"] = body

    oracle = None
    if "resolvent" in stages:
        body = {}
        suites = stages["resolvent"].get("suites", ["corrector"])
        bundle = build_operators(dec)
        if "corrector" in suites:
            oracle = corrector_diffusivity(bundle, dec)
            body["sigma2"] = oracle.sigma2.tolist()
            claim("resolvent", "corrector_residual", oracle.max_residual(),
                  oracle.max_residual() <= 1e-10, 1e-10)
        if "kv" in suites:
            ladder = 2.0 ** -np.arange(0, stages["resolvent"].get("ladder", 24) + 1)
            rep = kv_limits_check(bundle, dec.phi[0], ladder)
            body["kv_lam_u_sq_final"] = rep.lam_u_norm_sq[-1]
            body["kv_sigma2"] = rep.sigma2_kv
            claim("resolvent", "kv_condition_lam_u_sq", rep.lam_u_norm_sq[-1],
                  rep.lam_u_norm_sq[-1] < 1e-6, 1e-6)
        if "rsc" in suites and env.n_sites <= 4096:
            sector = sector_checks(bundle)
            rsc = rsc_operator_suite(bundle)
            ok = (rsc.norm_bounds_hold() and rsc.factorization_holds()
                  and sector.passes())
            body["rsc_bounds_hold"] = bool(ok)
            claim("resolvent", "rsc_bounds", float(ok), ok)
        report["stages"]["resolvent"] = body

    sim = None
    if "simulate" in stages:
        sim_cfg = stages["simulate"]
        paths = int(sim_cfg.get("paths", 1000))
        horizon = float(sim_cfg.get("horizon", 100.0))
        seed = stage_seed(master, "simulate")
        sim = walker.run_mi_ensemble(env, dec, paths, horizon, seed)
        body = {"paths": paths, "horizon": horizon, "seed": seed,
                "mean_jumps": float(sim["njumps"].mean())}
        if "klj" in sim_cfg.get("tracks", []):
            klj = walker.run_klj_ensemble(env, dec, paths, horizon, seed,
                                          stage_seed(master, "coins"))
            resid = float(np.max(np.abs(klj["K"] + klj["L"] + klj["J"] - klj["X"])))
            claim("simulate", "klj_reconstruction", resid, resid <= 1e-10, 1e-10)
            body["klj_reconstruction_residual"] = resid
        report["stages"]["simulate"] = body

    if "estimate" in stages and sim is not None:
        checks = stages["estimate"].get("checks", ["msd"])
        body = {}
        est = estimators.msd_diffusivity(sim["X"], sim["T"], sim["njumps"])
        body["sigma2_hat"] = est.sigma2.tolist()
        body["se"] = est.se.tolist()
        if oracle is not None and "msd" in checks:
            ok = est.within(oracle.sigma2)
            claim("estimate", "msd_vs_oracle_3se", float(np.max(
                np.abs(est.sigma2 - oracle.sigma2))), ok, "3*SE")
        if oracle is not None and h1 is not None and "bounds" in checks:
            rep = estimators.bounds_check(oracle.sigma2, env.s_star,
                                          env.s_upper, h1.ctilde, h1.dtilde)
            claim("estimate", "sigma2_bounds", float(np.min(rep.values)),
                  rep.all_pass)
        if oracle is not None and "clt" in checks:
            clt = estimators.clt_diagnostics(sim["X"], oracle.sigma2, sim["T"],
                                             njumps=sim["njumps"])
            thr = float(stages["estimate"].get("ks_threshold", 0.02))
            body["ks_distance"] = clt.ks_distance.tolist()
            claim("estimate", "clt_ks", float(np.max(clt.ks_distance)),
                  clt.passes(thr), thr)
        report["stages"]["estimate"] = body

    if "heatkernel" in stages:
        aux = walker.auxiliary_env(env, dec)
        n_max = int(stages["heatkernel"].get("n_max", (env.L // 4) ** 2))
        profile = estimators.heat_kernel_profile(aux, n_max)
        report["stages"]["heatkernel"] = {"peak": profile.peak,
                                          "n_max": n_max}

    report["passed"] = all(c["pass"] for c in claims)
    return _finish_report(report, out_dir)


def _finish_report(report: dict, out_dir) -> dict:
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        _write_json(os.path.join(out_dir, "report.json"), report)
    return report


def cmd_run(args) -> int:
    config = load_config(args.config)
    report = run_experiment(config, out_dir=args.out_dir)
    n_pass = sum(c["pass"] for c in report["claims"])
    print(f"run {report['config_hash']}: {n_pass}/{len(report['claims'])} "
          f"claims pass")
    for c in report["claims"]:
        flag = "pass" if c["pass"] else "FAIL"
        print(f"  [{flag}] {c['stage']}.{c['name']} = {c['value']}")
    return 0 if report["passed"] else 1


def cmd_emit_plotdata(args) -> int:
    with open(args.report) as fh:
        report = json.load(fh)
    rows = []
    for c in report.get("claims", []):
        rows.append((f"{c['stage']}.{c['name']}", "", c["value"], "", c["stage"]))
    stages = report.get("stages", {})
    if "estimate" in stages:
        body = stages["estimate"]
        sig = np.asarray(body.get("sigma2_hat", []))
        se = np.asarray(body.get("se", []))
        for i in range(sig.shape[0]):
            for j in range(sig.shape[1]):
                rows.append(("sigma2_hat", f"{i + 1}{j + 1}", sig[i, j],
                             se[i, j] if se.size else "", "estimate"))
    if "spectral" in stages:
        body = stages["spectral"]
        rows.append(("trace_ctilde", "", body["trace_ctilde"], "", "spectral"))
        rows.append(("trace_dtilde", "", body["trace_dtilde"], "", "spectral"))
    if "heatkernel" in stages:
        rows.append(("heat_kernel_peak", "", stages["heatkernel"]["peak"],
                     "", "heatkernel"))
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["quantity", "index", "value", "se", "stage"])
        w.writerows(rows)
    print(f"wrote {args.out}: {len(rows)} rows")
    return 0


# ---------------------------------------------------------------------------

def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="rwre", description=__doc__)
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an environment file")
    p.add_argument("--family", required=True,
                   choices=["stream_tensor", "manhattan", "cyclic", "symmetric"])
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--s-star", type=float, default=1.0)
    p.add_argument("--s-base", type=float, default=None)
    p.add_argument("--s-jitter", type=float, default=0.0)
    p.add_argument("--clip", type=float, default=0.9)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--tail-exponent", default=None)
    p.add_argument("--correlation-length", type=float, default=0.0)
    p.add_argument("--cycle-density", type=float, default=0.05)
    p.add_argument("--max-cycle-len", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("validate", help="validate an environment file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--json", default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("spectral", help="infrared functional and identities")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_spectral)

    p = sub.add_parser("simulate", help="trajectory ensemble summary")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--paths", type=int, required=True)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--tracks", default="mi")
    p.add_argument("--store-paths", default=None,
                   help="also store full trajectories (capped) to this npz")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimators over a summary file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--oracle", default=None)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("resolvent", help="operator suites and the corrector")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--suite", required=True, choices=["corrector", "rsc", "kv"])
    p.add_argument("--ladder", type=int, default=24)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_resolvent)

    p = sub.add_parser("heatkernel", help="exact lazy-walk decay profile")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--nmax", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_heatkernel)

    p = sub.add_parser("run", help="full pipeline from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("emit-plotdata", help="long-format CSV from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_emit_plotdata)
    return top


def main(argv=None) -> int:
    _apply_thread_cap()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
