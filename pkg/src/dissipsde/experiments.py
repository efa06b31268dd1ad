"""Experiment runners behind the command line interface.

Each runner consumes a validated ExperimentSpec, produces a report tree,
a flat list of check rows and any series CSV files, and reports overall
pass/fail.  Statistical failures and configuration errors are kept apart:
the former show up as passed=False, the latter raise ConfigError.
"""

from __future__ import annotations

import numpy as np

from . import __version__
from .analysis import (check_gradient_estimate, check_harnack, ou_second_moment)
from .config import (ExperimentSpec, build_model, build_test_function,
                     build_ultrabound_spec)
from .coupling import CouplingConfig, girsanov_moment_bound
from .errors import ConfigError
from .invariant import (check_hyperbound_condition, density_norm_bound_rhs,
                        estimate_invariant)
from .monotone import (YosidaParams, minimal_section, resolvent_scalar,
                       scalar_map_from_spec, yosida_scalar)
from .parallel import batched_coupled
from .reports import (check_row, fmt, write_checks_csv, write_json,
                      write_manifest, write_rows_csv)
from .sde import IntegratorConfig, path_to_binary, path_to_csv, simulate
from .spectral import ZeroDrift, theta_value
from .ultrabound import (check_contraction_bound, derive_a, fit_lambda,
                         ultrabound_envelope, ultrabound_log_envelope)


def default_t_grid(t_max: float) -> np.ndarray:
    head = np.array([1e-3, 1e-2, 0.1, 0.25])
    return np.concatenate([head[head < 0.5], np.linspace(0.5, t_max, 40)])


def _vec(params, key, n):
    raw = params.get(key)
    if raw is None or raw == "zero":
        return np.zeros(n)
    v = np.asarray(raw, dtype=float)
    if v.shape != (n,):
        raise ConfigError(f"params.{key}", f"expected a vector of length {n}")
    return v


# ---------------------------------------------------------------------------

def run_simulate(spec: ExperimentSpec, workers: int, outdir):
    model = build_model(spec.model)
    params = spec.params
    cfg = IntegratorConfig(dt=float(params["dt"]), t_end=float(params["t_end"]),
                           scheme=params.get("scheme", "exponential_euler"),
                           seed=spec.seed, stream_id=int(params.get("stream_id", 0)))
    record = simulate(model, cfg, _vec(params, "x0", model.n))
    path_to_csv(record, outdir / "path.csv")
    path_to_binary(record, outdir / "path.bin")
    results = {
        "n_steps": len(record.times) - 1,
        "final_state": record.states[-1],
        "final_norm_sq": float(np.sum(record.states[-1] ** 2)),
    }
    return results, [], True


def run_couple(spec: ExperimentSpec, workers: int, outdir):
    model = build_model(spec.model)
    params = spec.params
    x0 = _vec(params, "x0", model.n)
    y0 = _vec(params, "y0", model.n)
    dist0 = float(np.linalg.norm(x0 - y0))
    n_paths = int(params["N"])
    cfg = CouplingConfig(dt=float(params["dt"]), t_end=float(params["T"]),
                         scheme=params.get("scheme", "exponential_euler"),
                         seed=spec.seed, p=float(params.get("p", 2.0)),
                         glue_tol=params.get("glue_tol"))
    res = batched_coupled(model, cfg, x0, y0, n_paths, workers=workers)

    checks = []
    fraction_min = float(params.get("coupled_fraction_min", 0.99))
    checks.append(check_row(
        "coupled_fraction", lhs=res.coupled_fraction, rhs=fraction_min,
        passed=res.coupled_fraction >= fraction_min))

    weights = np.exp(res.log_r)
    mart = float(np.mean(weights))
    mart_se = float(np.std(weights, ddof=1) / np.sqrt(n_paths))
    checks.append(check_row(
        "girsanov_martingale", lhs=mart, rhs=1.0, se=mart_se,
        ratio=abs(mart - 1.0) / mart_se if mart_se > 0 else 0.0,
        passed=abs(mart - 1.0) <= 3.0 * mart_se))

    for p in params.get("p_values", [cfg.p]):
        p = float(p)
        q = p / (p - 1.0)
        vals = np.exp(q * res.log_r)
        mean = float(np.mean(vals))
        rel_se = float(np.std(vals, ddof=1) / np.sqrt(n_paths) / mean)
        emp = mean ** (p - 1.0)
        rel_se_emp = (p - 1.0) * rel_se
        bound = girsanov_moment_bound(model.sigma_inv_norm, p, model.omega,
                                      cfg.T, dist0)
        checks.append(check_row(
            f"girsanov_moment_p{p:g}", lhs=emp, rhs=bound,
            ratio=emp / bound, se=rel_se_emp,
            passed=emp <= bound * (1.0 + 3.0 * rel_se_emp)))

    slack = 10.0 * cfg.dt * (res.local_drift_bound + 1.0)
    worst = float(np.max(res.max_contraction_increase - slack))
    checks.append(check_row(
        "contraction_nonincreasing", lhs=worst, rhs=0.0, passed=worst <= 0.0))
    checks.append(check_row(
        "post_tau_identical",
        lhs=float(np.mean(res.post_tau_identical)), rhs=1.0,
        passed=bool(np.all(res.post_tau_identical))))

    write_rows_csv(outdir / "couple_paths.csv", ["path", "tau", "log_R"],
                   [(i, res.tau[i], res.log_r[i]) for i in range(n_paths)])
    results = {
        "N": n_paths, "dist0": dist0,
        "fraction_coupled": res.coupled_fraction,
        "martingale": {"estimate": mart, "se": mart_se},
        "glue_tol": cfg.resolved_glue_tol(dist0),
    }
    return results, checks, all(c["passed"] for c in checks)


def run_harnack(spec: ExperimentSpec, workers: int, outdir):
    model = build_model(spec.model)
    params = spec.params
    x0 = _vec(params, "x0", model.n)
    y0 = _vec(params, "y0", model.n)
    f = build_test_function(params["f"])
    cfg = IntegratorConfig(dt=float(params["dt"]), t_end=float(params["t"]),
                           scheme=params.get("scheme", "exponential_euler"),
                           seed=spec.seed)
    rep = check_harnack(model, cfg, x0, y0, f, float(params["p"]),
                        int(params["N"]), workers=workers)
    checks = [check_row("harnack", lhs=rep.lhs[0], rhs=rep.rhs_expectation[0],
                        constant=rep.constant, ratio=rep.ratio,
                        se=rep.combined_rel_se, passed=rep.passed)]
    results = {
        "lhs": {"value": rep.lhs[0], "se": rep.lhs[1]},
        "rhs_expectation": {"value": rep.rhs_expectation[0],
                            "se": rep.rhs_expectation[1]},
        "constant": rep.constant, "ratio": rep.ratio,
    }

    # two-level regularization sweep: beta -> 0 inside each alpha
    alpha_grid = params.get("alpha_grid")
    beta_grid = params.get("beta_grid")
    if alpha_grid and beta_grid and spec.model.get("drift", {}).get("kind") == "nemytskii":
        sweep_rows = []
        sweep_n = int(params.get("sweep_N", min(int(params["N"]), 2000)))
        probes = np.random.default_rng(spec.seed).normal(0.0, 0.5, (8, model.n))
        for alpha in alpha_grid:
            base_spec = dict(spec.model)
            base_spec["drift"] = dict(base_spec["drift"], alpha=float(alpha))
            base_model = build_model(base_spec)
            dt_a = min(cfg.dt, float(alpha) / 4.0)
            gaps = []
            for beta in sorted(beta_grid, reverse=True):
                sm_spec = dict(base_spec)
                sm_spec["drift"] = dict(sm_spec["drift"],
                                        smoothing={"beta": float(beta)})
                sm_model = build_model(sm_spec)
                gap = float(np.mean(np.linalg.norm(
                    sm_model.drift(probes) - base_model.drift(probes), axis=1)))
                gaps.append(gap)
                cfg_ab = IntegratorConfig(dt=dt_a, t_end=cfg.t_end,
                                          scheme=cfg.scheme, seed=spec.seed)
                rep_ab = check_harnack(sm_model, cfg_ab, x0, y0, f,
                                       float(params["p"]), sweep_n,
                                       workers=workers)
                sweep_rows.append((float(alpha), float(beta), gap,
                                   rep_ab.ratio, rep_ab.combined_rel_se,
                                   rep_ab.passed))
                checks.append(check_row(
                    f"harnack_a{alpha:g}_b{beta:g}", ratio=rep_ab.ratio,
                    se=rep_ab.combined_rel_se, passed=rep_ab.passed))
            converges = all(gaps[i + 1] <= gaps[i] + 1e-12
                            for i in range(len(gaps) - 1))
            checks.append(check_row(
                f"smoothing_converges_a{alpha:g}", lhs=gaps[-1], rhs=gaps[0],
                passed=converges))
        write_rows_csv(outdir / "harnack_sweep.csv",
                       ["alpha", "beta", "smoothing_gap", "ratio", "rel_se", "pass"],
                       sweep_rows)

    return results, checks, all(c["passed"] for c in checks)


def run_gradient(spec: ExperimentSpec, workers: int, outdir):
    model = build_model(spec.model)
    params = spec.params
    x0 = _vec(params, "x0", model.n)
    y0 = _vec(params, "y0", model.n)
    f = build_test_function(params["f"])
    cfg = IntegratorConfig(dt=float(params["dt"]), t_end=float(params["t"]),
                           scheme=params.get("scheme", "exponential_euler"),
                           seed=spec.seed)
    rep = check_gradient_estimate(model, cfg, x0, y0, f, int(params["N"]),
                                  workers=workers)
    checks = []
    if rep.sup_bound is not None:
        checks.append(check_row("gradient_sup", lhs=rep.difference,
                                rhs=rep.sup_bound, se=rep.combined_se,
                                passed=rep.passed_sup))
    if rep.lip_bound is not None:
        checks.append(check_row("gradient_lip", lhs=rep.difference,
                                rhs=rep.lip_bound, se=rep.combined_se,
                                passed=rep.passed_lip))
    if not checks:
        raise ConfigError("params.f", "test function carries neither a sup "
                                      "nor a Lipschitz norm")
    results = {"difference": rep.difference, "combined_se": rep.combined_se,
               "sup_bound": rep.sup_bound, "lip_bound": rep.lip_bound}
    return results, checks, all(c["passed"] for c in checks)


def run_invariant(spec: ExperimentSpec, workers: int, outdir):
    model = build_model(spec.model)
    params = spec.params
    cfg = IntegratorConfig(dt=float(params["dt"]), t_end=float(params["horizon"]),
                           scheme=params.get("scheme", "exponential_euler"),
                           seed=spec.seed)
    functionals = [tuple(d) for d in params.get(
        "functionals", [["abs_moment", 1], ["abs_moment", 2],
                        ["mode_second_moment"]])]
    est = estimate_invariant(model, cfg, float(params["burn_in"]),
                             float(params["horizon"]), functionals)

    checks = []
    if isinstance(model.drift, ZeroDrift) and model.sigma_is_diagonal:
        exact_vars = stationary_mode_variances(model)
        for k in range(model.n):
            key = f"mode2_{k+1}"
            if key in est.moments:
                e, se = est.moments[key]
                checks.append(check_row(
                    key, lhs=e, rhs=float(exact_vars[k]), se=se,
                    passed=abs(e - exact_vars[k]) <= 3.0 * se))
        if "theta" in est.moments and model.theta is not None:
            exact_theta = float(model.theta.weights() @ exact_vars)
            e, se = est.moments["theta"]
            checks.append(check_row("theta", lhs=e, rhs=exact_theta, se=se,
                                    passed=abs(e - exact_theta) <= 3.0 * se))

    results = {"alpha": est.alpha, "burn_in": est.burn_in,
               "horizon": est.horizon,
               "moments": {k: {"estimate": v[0], "se": v[1]}
                           for k, v in est.moments.items()}}

    if params.get("lambda_grid"):
        record = simulate(model, cfg, np.zeros(model.n))
        samples = record.states[record.times >= float(params["burn_in"])]
        hb = check_hyperbound_condition(samples, params["lambda_grid"],
                                        model.omega, model.sigma_inv_norm)
        results["hyperbound"] = {
            "threshold": hb.threshold,
            "smallest_stable_lambda": hb.smallest_stable_lambda,
            "table": {f"{lam:g}": {"estimate": e, "stable": s}
                      for lam, (e, s) in hb.table.items()},
        }
        probe = params.get("density_probe")
        if probe:
            bound, se = density_norm_bound_rhs(
                samples, np.asarray(probe["x"], dtype=float),
                float(probe["p"]), model.omega, float(probe["t"]),
                model.sigma_inv_norm)
            results["density_norm_rhs"] = {"bound": bound, "se": se}

    write_rows_csv(outdir / "invariant.csv", ["name", "estimate", "se"],
                   [(k, v[0], v[1]) for k, v in sorted(est.moments.items())])
    return results, checks, all(c["passed"] for c in checks)


def stationary_mode_variances(model) -> np.ndarray:
    """Exact per-mode stationary variance sigma_k^2/(-2 a_k) of the
    zero-drift model."""
    return model.sigma_diag**2 / (-2.0 * model.a_eigs)


def run_ultrabound(spec: ExperimentSpec, workers: int, outdir):
    params = spec.params
    base = build_ultrabound_spec(params)
    a_values = [float(a) for a in params.get("a_values", [1.0])]
    multipliers = [float(m) for m in params.get("y0_multipliers", [0.0, 1.0, 10.0])]
    t_grid = default_t_grid(float(params.get("t_max", 20.0)))

    model = build_model(spec.model) if spec.model else None
    checks = []
    series = []
    fitted = {}
    for a in a_values:
        ub = build_ultrabound_spec(dict(params, a=a))
        level = ub.phi0_inverse(2.0 * a)
        for mult in multipliers:
            rep = check_contraction_bound(ub, mult * level, t_grid)
            tag = f"a{a:g}_y{mult:g}"
            checks.append(check_row(f"ode_bound_{tag}", lhs=rep.max_excess,
                                    rhs=1e-6, passed=rep.passed))
            if rep.case1_applies:
                checks.append(check_row(f"case1_{tag}", lhs=rep.case1_max_y,
                                        rhs=rep.level, passed=rep.case1_passed))
            for t, y, b in zip(rep.t_grid, rep.y_values, rep.bounds):
                series.append((a, mult * level, t, y, b))
        if model is not None:
            fitted[f"a{a:g}"] = fit_lambda(ub, model.omega,
                                           model.sigma_inv_norm, t_grid)

    write_rows_csv(outdir / "contraction_series.csv",
                   ["a", "y0", "t", "y", "bound"], series)

    lam = float(params.get("lambda_const", 1.0))
    rate = float(params.get("omega_rate",
                            abs(model.omega) if model is not None else 1.0))
    env_spec = build_ultrabound_spec(dict(params, a=a_values[0]))
    env = ultrabound_envelope(env_spec, lam, rate, t_grid)
    log_env = ultrabound_log_envelope(env_spec, lam, rate, t_grid)
    env_rows = [(t, e, le) for t, e, le in zip(t_grid, env, log_env)]
    write_rows_csv(outdir / "envelope_series.csv",
                   ["t", "envelope", "log_envelope"], env_rows)
    checks.append(check_row("envelope_nonincreasing",
                            passed=bool(np.all(np.diff(log_env) <= 1e-12))))

    results = {"lambda_const": lam, "omega_rate": rate,
               "derived_a_from_c": derive_a(
                   model.omega if model is not None else 0.0, base),
               "fitted_lambda": fitted}
    return results, checks, all(c["passed"] for c in checks)


def run_yosida_table(spec: ExperimentSpec, workers: int, outdir):
    params = spec.params
    fmap = scalar_map_from_spec(params["map"])
    alphas = sorted(float(a) for a in params["alpha_grid"])
    rs = np.asarray(params["r_grid"], dtype=float)
    rows = []
    dom_violations = 0
    conv_err = {}
    f0 = minimal_section(fmap, rs)
    at_jump = np.isin(rs, fmap.breakpoints)
    for alpha in alphas:
        p = YosidaParams(alpha=alpha)
        j = resolvent_scalar(fmap, p, rs)
        fa = yosida_scalar(fmap, p, rs)
        gap = np.abs(fa) - np.abs(f0)
        dom_violations += int(np.sum(gap > 1e-8))
        conv_err[alpha] = float(np.mean(np.abs(fa - f0)[~at_jump])) \
            if np.any(~at_jump) else 0.0
        for i, r in enumerate(rs):
            rows.append((alpha, r, j[i], fa[i], f0[i], gap[i]))
    write_rows_csv(outdir / "yosida_table.csv",
                   ["alpha", "r", "resolvent", "yosida", "minimal_section",
                    "domination_gap"], rows)
    checks = [check_row("domination_violations", lhs=float(dom_violations),
                        rhs=0.0, passed=dom_violations == 0)]
    if len(alphas) >= 2:
        checks.append(check_row(
            "alpha_convergence", lhs=conv_err[alphas[0]],
            rhs=conv_err[alphas[-1]],
            passed=conv_err[alphas[0]] <= conv_err[alphas[-1]] + 1e-12))
    results = {"mean_abs_error_vs_f0": {f"{a:g}": conv_err[a] for a in alphas}}
    return results, checks, all(c["passed"] for c in checks)


RUNNERS = {
    "simulate": run_simulate,
    "couple": run_couple,
    "harnack": run_harnack,
    "gradient": run_gradient,
    "invariant": run_invariant,
    "ultrabound": run_ultrabound,
    "yosida-table": run_yosida_table,
}


def run(spec: ExperimentSpec, workers: int, outdir) -> int:
    """Execute one experiment; returns the process exit status.

    0: all checks passed; 2: statistical failure; configuration problems
    raise ConfigError before anything is written.
    """
    from pathlib import Path
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    results, checks, passed = RUNNERS[spec.experiment](spec, workers, outdir)
    report = {
        "experiment": spec.experiment,
        "config": spec.to_dict(),
        "results": results,
        "checks": checks,
        "passed": passed,
    }
    write_json(outdir / "report.json", report)
    write_checks_csv(outdir / "checks.csv", checks)
    write_manifest(outdir / "manifest.json", spec.to_dict(), __version__)
    return 0 if passed else 2
