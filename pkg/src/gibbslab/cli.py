"""Command-line experiments.

Usage::

    gibbslab <command> [--config PATH] [--seed U64] [--out DIR] [--workers N] [--timing]

Configuration is a single JSON object with flat dotted keys such as
``"problem.n"``; unknown keys are rejected.  Exit codes: 0 pass, 2 failed
check, 3 configuration error, 4 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from gibbslab import bounds as bd
from gibbslab import estimators as est
from gibbslab import gaussian_mean as gm
from gibbslab.core import EstimateWithError, substream
from gibbslab.report import loglog_slope, write_csv, write_loglog_svg
from gibbslab.samplers import ChainConfig, DivergenceError, exact_gibbs_learner, langevin_chain, \
    langevin_learner

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


GAUSSIAN_KEYS = {
    "problem.d": 1,
    "problem.n": 10,
    "problem.mu": 0.0,
    "problem.mu0": 0.0,
    "problem.sigma0_sq": 1.0,
    "problem.sigmaZ_sq": 1.0,
    "problem.sigma_sq": 1.0,
}

DISCRETE_KEYS = {
    "discrete.loss_table": [[0.0, 1.0], [1.0, 0.0]],
    "discrete.prior": [0.5, 0.5],
    "discrete.pz": [0.5, 0.5],
    "discrete.alpha": 1.0,
    "discrete.n": 1,
}

GENERATOR_KEYS = {
    "gen.z_max": 4,
    "gen.w_max": 5,
    "gen.n_max": 3,
    "gen.alphas": [0.5, 1.0, 2.0],
}

COMMON_KEYS = {"seed": None, "out": "out", "workers": 1}


# ---------------------------------------------------------------------------
# configuration helpers


def _gaussian_problem(cfg, **override) -> gm.GaussianMeanProblem:
    vals = {k.split(".", 1)[1]: cfg[k] for k in GAUSSIAN_KEYS}
    vals.update(override)
    try:
        return gm.GaussianMeanProblem(d=int(vals["d"]), n=int(vals["n"]), mu=vals["mu"], mu0=vals["mu0"],
                                      sigma0_sq=float(vals["sigma0_sq"]),
                                      sigmaZ_sq=float(vals["sigmaZ_sq"]),
                                      sigma_sq=float(vals["sigma_sq"]))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid Gaussian problem: {exc}") from exc


def _discrete_problem(cfg, **override) -> est.DiscreteProblem:
    vals = {k.split(".", 1)[1]: cfg[k] for k in DISCRETE_KEYS}
    vals.update(override)
    try:
        return est.DiscreteProblem(np.asarray(vals["loss_table"], dtype=float),
                                   np.asarray(vals["prior"], dtype=float), float(vals["alpha"]),
                                   int(vals["n"]), pz=np.asarray(vals["pz"], dtype=float))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid discrete problem: {exc}") from exc


def _axis_values(cfg):
    values = cfg["sweep.values"]
    if not isinstance(values, list) or len(values) < 2:
        raise ConfigError("sweep.values needs at least two points")
    if any(not isinstance(v, (int, float)) for v in values):
        raise ConfigError("sweep.values must be numeric")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError("sweep.values must be strictly increasing")
    return values


def _pool_map(fn, items, workers):
    """Map in deterministic input order on a bounded thread pool."""
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# commands


def run_verify_thm1_discrete(cfg, out: Path, workers: int, timing: bool) -> int:
    seed = cfg["seed"]
    tol = cfg["tolerance"]

    def one(i):
        rng = substream(seed, i)
        p = est.random_discrete_problem(rng, cfg["gen.z_max"], cfg["gen.w_max"], cfg["gen.n_max"],
                                        cfg["gen.alphas"], iid=cfg["gen.iid"])
        t = est.enumerate_joint(p)
        gen = est.exact_gen_discrete(p, t)
        info = est.exact_info_discrete(t)
        return dict(instance=i, z_size=p.z_size, w_size=p.w_size, n=p.n, alpha=p.alpha, gen=gen,
                    mutual=info.mutual, lautum=info.lautum, skl=info.skl,
                    residual=abs(p.alpha * gen - info.skl))

    if cfg["instances"] < 1:
        raise ConfigError("instances must be >= 1")
    rows = _pool_map(one, range(cfg["instances"]), workers)
    cols = ["instance", "z_size", "w_size", "n", "alpha", "gen", "mutual", "lautum", "skl", "residual"]
    write_csv(out / "verify_thm1_discrete.csv", cols, rows)
    worst = max(rows, key=lambda r: r["residual"])
    print(f"{len(rows)} instances, max |alpha*gen - I_SKL| = {worst['residual']:.3e} (tolerance {tol:g})")
    if worst["residual"] > tol:
        print(f"violation: instance {worst['instance']} (seed {seed}): {worst}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _gaussian_mc(p, outer, fresh, seed, tasks, workers, base=0):
    spec = p.gibbs_spec()
    learner = exact_gibbs_learner(spec)
    model = p.data_model()
    sizes = [outer // tasks + (1 if i < outer % tasks else 0) for i in range(tasks)]

    def one(i):
        return est.gen_error_samples(model, learner, spec.loss, p.n, sizes[i], substream(seed, base + i),
                                     fresh)

    parts = _pool_map(one, [i for i in range(tasks) if sizes[i] > 0], workers)
    return EstimateWithError.from_samples(np.concatenate(parts))


def run_verify_thm1_gaussian(cfg, out, workers, timing) -> int:
    p = _gaussian_problem(cfg)
    outer, tasks = cfg["mc.outer"], cfg["mc.tasks"]
    if outer < 100 or tasks < 1:
        raise ConfigError("need mc.outer >= 100 and mc.tasks >= 1")
    t0 = time.perf_counter()
    mc = _gaussian_mc(p, outer, cfg["mc.fresh_per_risk"], cfg["seed"], tasks, workers)
    exact = gm.gen_error_closed(p)
    iskl = gm.iskl_closed(p)
    ok = abs(mc.value - exact) <= 3 * mc.std_error
    row = dict(exact_gen=exact, mc_gen=mc.value, mc_se=mc.std_error, n_samples=mc.n_samples,
               iskl=iskl, iskl_over_alpha=iskl / p.alpha, within_3se=ok,
               wall_ms=(time.perf_counter() - t0) * 1e3 if timing else None)
    cols = ["exact_gen", "mc_gen", "mc_se", "n_samples", "iskl", "iskl_over_alpha", "within_3se", "wall_ms"]
    write_csv(out / "verify_thm1_gaussian.csv", cols, [row])
    print(f"exact gen {exact:.6f}, I_SKL/alpha {iskl / p.alpha:.6f}, Monte Carlo {mc}")
    return EXIT_OK if ok else EXIT_FAIL


RESULT_COLUMNS = ["sweep_value", "exact_gen", "mc_gen", "mc_se", "iskl", "mutual", "lautum", "thm2",
                  "thm2_ce", "dp", "raginsky", "kuzborskij", "ismi_printed", "ismi_derived",
                  "ismi_numeric", "wall_ms"]
BOUND_COLUMNS = ["thm2", "thm2_ce", "dp", "raginsky", "kuzborskij", "ismi_printed", "ismi_derived",
                 "ismi_numeric"]


def _gaussian_row(p: gm.GaussianMeanProblem, outer, fresh, rng):
    info = gm.mi_lautum_closed(p)
    row = dict(exact_gen=gm.gen_error_closed(p), iskl=gm.iskl_closed(p), mutual=info.mutual,
               lautum=info.lautum)
    if p.n >= 2:
        for mode in bd.ISMI_MODES:
            row[f"ismi_{mode}"] = bd.ismi_bound(p, mode)
    if outer:
        spec = p.gibbs_spec()
        mc = est.mc_gen_error(p.data_model(), exact_gibbs_learner(spec), spec.loss, p.n, outer, rng, fresh)
        row.update(mc_gen=mc.value, mc_se=mc.std_error)
    return row


def _discrete_row(p: est.DiscreteProblem, outer, rng):
    t = est.enumerate_joint(p)
    info = est.exact_info_discrete(t)
    lo, hi = p.loss().value_range()
    sigma = (hi - lo) / 2.0
    prior = bd.prior_bounds(sigma, p.alpha, p.n, info.mutual)
    row = dict(exact_gen=est.exact_gen_discrete(p, t), iskl=info.skl, mutual=info.mutual,
               lautum=info.lautum, thm2=bd.thm2_bound(bd.BoundInputs(sigma, p.alpha, p.n, 0.0)),
               thm2_ce=bd.thm2_bound(bd.BoundInputs(sigma, p.alpha, p.n,
                                                    bd.c_e_exact(info.mutual, info.lautum))),
               kuzborskij=prior.kuzborskij)
    if lo >= 0 and hi <= 1:
        row.update(dp=prior.dp, raginsky=prior.raginsky)
    if outer:
        spec = p.gibbs_spec()
        mc = est.mc_gen_error(p.data_model(), exact_gibbs_learner(spec), spec.loss, p.n, outer, rng)
        row.update(mc_gen=mc.value, mc_se=mc.std_error)
    return row


def run_sweep(cfg, out, workers, timing) -> int:
    axis = cfg["sweep.axis"]
    kind = cfg["problem.kind"]
    if axis not in ("n", "alpha"):
        raise ConfigError("sweep.axis must be 'n' or 'alpha'")
    if kind not in ("gaussian", "discrete"):
        raise ConfigError("problem.kind must be 'gaussian' or 'discrete'")
    values = _axis_values(cfg)
    if axis == "n" and any(int(v) != v or v < 1 for v in values):
        raise ConfigError("sample sizes must be positive integers")
    outer = cfg["mc.outer"]
    if outer and outer < 100:
        raise ConfigError("mc.outer must be 0 or >= 100")

    def build(v):
        if kind == "gaussian":
            if axis == "n":
                return _gaussian_problem(cfg, n=int(v))
            # alpha = n / (2 sigma^2)
            return _gaussian_problem(cfg, sigma_sq=cfg["problem.n"] / (2.0 * v))
        return _discrete_problem(cfg, **({"n": int(v)} if axis == "n" else {"alpha": float(v)}))

    problems = [build(v) for v in values]

    def one(i):
        t0 = time.perf_counter()
        rng = substream(cfg["seed"], i)
        if kind == "gaussian":
            row = _gaussian_row(problems[i], outer, cfg["mc.fresh_per_risk"], rng)
        else:
            row = _discrete_row(problems[i], outer, rng)
        row["sweep_value"] = values[i]
        if timing:
            row["wall_ms"] = (time.perf_counter() - t0) * 1e3
        return row

    rows = _pool_map(one, range(len(values)), workers)
    slopes = {"sweep_value": "slope"}
    for col in RESULT_COLUMNS[1:]:
        if col in ("wall_ms", "mc_se"):
            continue
        slopes[col] = loglog_slope(values, [r.get(col) for r in rows])
    write_csv(out / "sweep.csv", RESULT_COLUMNS, rows + [slopes])
    series = {c: [r.get(c) for r in rows] for c in ["exact_gen", "mc_gen"] + BOUND_COLUMNS}
    write_loglog_svg(out / "sweep.svg", values, series, axis, f"{kind} problem: generalization error vs {axis}")
    shown = {k: v for k, v in slopes.items() if v is not None and k != "sweep_value"}
    print("log-log slopes: " + ", ".join(f"{k}={v:.3f}" for k, v in shown.items()))
    return EXIT_OK


def run_mixture_concavity(cfg, out, workers, timing) -> int:
    lams = np.linspace(0.0, 1.0, cfg["mixture.lambdas"])
    if cfg["mixture.lambdas"] < 2 or cfg["instances"] < 1:
        raise ConfigError("need mixture.lambdas >= 2 and instances >= 1")

    def one(i):
        rng = substream(cfg["seed"], i)
        p1, p2 = est.random_domain_pair(rng, cfg["gen.z_max"], cfg["gen.w_max"], cfg["gen.n_max"],
                                        cfg["gen.alphas"])
        if cfg["mixture.identical"]:
            p2 = p1
        out_rows = []
        for lam in lams:
            chk = est.mixture_concavity_check(p1, p2, float(lam))
            out_rows.append(dict(instance=i, lam=float(lam), gen_mixture=chk.gen_mixture,
                                 avg_gen=chk.avg_gen, slack=chk.slack))
        return out_rows

    rows = [r for part in _pool_map(one, range(cfg["instances"]), workers) for r in part]
    write_csv(out / "mixture_concavity.csv", ["instance", "lam", "gen_mixture", "avg_gen", "slack"], rows)
    worst = min(r["slack"] for r in rows)
    print(f"{len(rows)} mixture evaluations, min slack {worst:.3e}")
    return EXIT_OK if worst >= -1e-12 else EXIT_FAIL


def run_sgld_convergence(cfg, out, workers, timing) -> int:
    p = _gaussian_problem(cfg)
    seed = cfg["seed"]
    checkpoints = cfg["checkpoints"]
    if (not isinstance(checkpoints, list) or not checkpoints
            or any(b <= a for a, b in zip(checkpoints, checkpoints[1:])) or checkpoints[0] < 5):
        raise ConfigError("checkpoints must be a strictly increasing list of step counts >= 5")
    steps = int(checkpoints[-1])
    n_chains = cfg["chain.chains"]
    gamma = cfg["chain.step_size"]
    noise_scale = cfg["chain.noise_scale"]
    if n_chains < 1 or gamma < 0 or noise_scale < 0:
        raise ConfigError("need chain.chains >= 1, chain.step_size >= 0, chain.noise_scale >= 0")
    spec = p.gibbs_spec()
    s = p.data_model().sample(substream(seed, 0), p.n, 1)[0]
    post = gm.posterior_params(p, s)
    chain_cfg = ChainConfig(steps, burn_in=0, step_size=gamma, noise_scale=noise_scale)

    def chain(c):
        return langevin_chain(spec, s, chain_cfg, substream(seed, 1 + c)).draws

    draws = np.stack(_pool_map(chain, range(n_chains), workers))
    learner = langevin_learner(spec, chain_cfg)
    model = p.data_model()
    lrng = substream(seed, 1 + n_chains)
    data = model.sample(lrng, p.n, cfg["learner.outer"])
    snaps = learner(data, lrng, checkpoints=checkpoints)
    target = gm.iskl_closed(p) / p.alpha
    rows = []
    for k, w in zip(checkpoints, snaps):
        pooled = draws[:, k // 5:k].reshape(-1, p.d)
        mean = pooled.mean(axis=0)
        var = pooled.var(axis=0, ddof=1).mean() if pooled.shape[0] > 1 else 0.0
        scale = max(float(np.linalg.norm(post.mean)), math.sqrt(post.sigma1_sq))
        gap = est.risk_gap(model, spec.loss, data, w, lrng, cfg["learner.fresh_per_risk"])
        mc = EstimateWithError.from_samples(gap)
        rows.append(dict(checkpoint=k, chain_mean=float(mean.mean()), post_mean=float(post.mean.mean()),
                         mean_rel_err=float(np.linalg.norm(mean - post.mean)) / scale, chain_var=var,
                         post_var=post.sigma1_sq, var_rel_err=abs(var - post.sigma1_sq) / post.sigma1_sq,
                         mc_gen=mc.value, mc_se=mc.std_error, iskl_over_alpha=target,
                         gap=mc.value - target))
    cols = ["checkpoint", "chain_mean", "post_mean", "mean_rel_err", "chain_var", "post_var",
            "var_rel_err", "mc_gen", "mc_se", "iskl_over_alpha", "gap"]
    write_csv(out / "sgld_convergence.csv", cols, rows)
    last = rows[-1]
    print(f"final: mean err {last['mean_rel_err']:.3%}, variance err {last['var_rel_err']:.3%}, "
          f"Langevin gen {last['mc_gen']:.4f} ± {last['mc_se']:.4f} vs I_SKL/alpha {target:.4f}")
    return EXIT_OK


def run_bounds_compare(cfg, out, workers, timing) -> int:
    rows = []
    kind = cfg["problem.kind"]
    if kind == "gaussian":
        p = _gaussian_problem(cfg)
        exact = gm.gen_error_closed(p)
        info = gm.mi_lautum_closed(p)
        printed = gm.mi_lautum_printed(p)
        vals = [("exact_gen", exact), ("iskl", gm.iskl_closed(p)), ("alpha", p.alpha),
                ("mutual", info.mutual), ("lautum", info.lautum), ("skl", info.skl),
                ("mutual_printed", printed.mutual), ("lautum_printed", printed.lautum),
                ("skl_printed", printed.skl), ("per_sample_mi", gm.per_sample_mi_closed(p))]
        if p.n >= 2:
            ismi = {m: bd.ismi_bound(p, m) for m in bd.ISMI_MODES}
            vals += [(f"ismi_{m}", v) for m, v in ismi.items()]
            vals.append(("exact_exceeds_ismi_printed", exact > ismi["printed"]))
    elif kind == "discrete":
        p = _discrete_problem(cfg)
        row = _discrete_row(p, 0, None)
        vals = [(k, row.get(k)) for k in ["exact_gen", "iskl", "mutual", "lautum", "thm2", "thm2_ce", "dp",
                                          "raginsky", "kuzborskij"]]
        lo, hi = p.loss().value_range()
        vals.append(("xu_mi", bd.prior_bounds((hi - lo) / 2, p.alpha, p.n, row["mutual"]).xu_mi))
    else:
        raise ConfigError("problem.kind must be 'gaussian' or 'discrete'")
    rows = [dict(quantity=k, value=v) for k, v in vals]
    write_csv(out / "bounds_compare.csv", ["quantity", "value"], rows)
    for k, v in vals:
        print(f"{k:28s} {v}")
    return EXIT_OK


COMMANDS = {
    "verify-thm1-discrete": (run_verify_thm1_discrete, {
        "instances": 100, "tolerance": 1e-10, "gen.iid": True, **GENERATOR_KEYS}),
    "verify-thm1-gaussian": (run_verify_thm1_gaussian, {
        **GAUSSIAN_KEYS, "problem.d": 2, "mc.outer": 200_000, "mc.fresh_per_risk": 1, "mc.tasks": 8}),
    "sweep": (run_sweep, {
        "problem.kind": "gaussian", **GAUSSIAN_KEYS,
        **DISCRETE_KEYS,
        "sweep.axis": "n", "sweep.values": [4, 8, 16, 32, 64, 128],
        "mc.outer": 20_000, "mc.fresh_per_risk": 1}),
    "mixture-concavity": (run_mixture_concavity, {
        "instances": 50, "mixture.lambdas": 11, "mixture.identical": False, **GENERATOR_KEYS}),
    "sgld-converge": (run_sgld_convergence, {
        **GAUSSIAN_KEYS, "problem.mu": 1.0, "chain.step_size": 1e-3, "chain.noise_scale": 1.0,
        "chain.chains": 32, "checkpoints": [1000, 5000, 20000, 50000, 200000],
        "learner.outer": 1000, "learner.fresh_per_risk": 4}),
    "bounds-compare": (run_bounds_compare, {
        "problem.kind": "gaussian", **GAUSSIAN_KEYS, "problem.d": 2, **DISCRETE_KEYS}),
}


def load_config(command: str, path: str | None, overrides: dict) -> dict:
    """Merge defaults, the JSON file and command-line overrides; validate keys and types."""
    defaults = dict(COMMON_KEYS)
    defaults.update(COMMANDS[command][1])
    user = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
    unknown = sorted(set(user) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")
    cfg = dict(defaults)
    cfg.update(user)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    for key, default in defaults.items():
        cfg[key] = _coerce(key, cfg[key], default)
    if cfg["seed"] is None:
        raise ConfigError("a seed is mandatory (--seed or \"seed\" in the config)")
    return cfg


def _coerce(key, value, default):
    if key == "seed":
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false")
    elif isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer")
    elif isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number")
        value = float(value)
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string")
    elif isinstance(default, list) and not isinstance(value, (list, int, float)):
        raise ConfigError(f"{key} must be a list")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gibbslab", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON config with flat dotted keys")
    parser.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    parser.add_argument("--out", help="output directory (default: out)")
    parser.add_argument("--workers", type=int, help="worker threads (default: 1)")
    parser.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args.config,
                          {"seed": args.seed, "out": args.out, "workers": args.workers})
        if cfg["workers"] < 1:
            raise ConfigError("workers must be >= 1")
        runner = COMMANDS[args.command][0]
        return runner(cfg, Path(cfg["out"]), cfg["workers"], args.timing)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, FloatingPointError) as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
