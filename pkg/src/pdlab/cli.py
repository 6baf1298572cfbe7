"""Command-line driver: ``pdlab <subcommand> [flags]``.

Every run writes three kinds of file into the output directory: the resolved
configuration (``config.txt``, flat ``key=value``), one or more data CSVs
and ``summary.json``. Settings come from defaults, then ``--config FILE``,
then explicit flags. The output directory is ``--output-dir``, else the
``PDLAB_OUTPUT_DIR`` environment variable, else ``output_dir`` from the
config file, else ``pdlab-output/<subcommand>``.

Exit codes: 0 success, 1 invalid input (including unknown flags), 2 numerical
failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .errors import DomainError, NumericError
from .inequality.rates import (rate_exponent_localization, rate_exponent_perturbation,
                               rate_exponent_proof)
from .numerics import RngStream

ENV_OUTPUT = "PDLAB_OUTPUT_DIR"
_NOT_CONFIG = {"command", "config", "func"}
_EXPONENTS = {"perturbation": rate_exponent_perturbation, "proof": rate_exponent_proof,
              "localization": rate_exponent_localization}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# value parsing helpers
# ---------------------------------------------------------------------------

def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as e:
        raise DomainError(f"expected a comma-separated list of numbers, got {text!r}") from e


def _model(args):
    from .simplex import ModelParams
    if args.p:
        p = _floats(args.p)
        if args.d is not None and len(p) != args.d + 1:
            raise DomainError("--p must have d + 1 entries")
        return ModelParams(args.theta, p)
    return ModelParams.uniform(args.theta, 1 if args.d is None else args.d)


def _grid(lo, hi, n):
    if n < 1 or not (lo > 0 and hi >= lo):
        raise DomainError("grid needs 0 < min <= max and n >= 1")
    return np.logspace(math.log10(lo), math.log10(hi), n) if n > 1 else np.array([lo])


def _base(args):
    from .stick_breaking import BasePmf
    if args.base == "finite":
        return BasePmf.finite(_floats(args.base_probs))
    if args.base == "geometric":
        return BasePmf.geometric(args.ratio)
    return BasePmf.inverse_square()


def _pmap(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


# ---------------------------------------------------------------------------
# subcommands: each returns (tables, summary); tables maps file stem -> (header, rows)
# ---------------------------------------------------------------------------

def cmd_sample_gem(args, rng):
    from .stick_breaking import GemParams, sample_gem, to_descending
    gp = GemParams(args.alpha, args.theta)
    rows, tails, counts = [], [], []
    for i in range(args.n):
        ws = sample_gem(gp, args.trunc_eps, rng.substream(i))
        if args.descending:
            ws = to_descending(ws)
        rows += [(i, k + 1, w) for k, w in enumerate(ws.weights)]
        tails.append(ws.tail_mass)
        counts.append(len(ws.weights))
    return ({"weights": (["sample", "index", "weight"], rows)},
            {"n_samples": args.n, "sticks_mean": float(np.mean(counts)),
             "tail_mass_max": float(np.max(tails))})


def cmd_sample_dp(args, rng):
    from .stick_breaking import GemParams, sample_dirichlet_process
    gp = GemParams(args.alpha, args.theta)
    base = _base(args)
    rows, defects = [], []
    for i in range(args.n):
        m = sample_dirichlet_process(gp, base, args.trunc_eps, rng.substream(i))
        rows += [(i, int(l), w) for l, w in zip(m.labels, m.weights)]
        defects.append(m.defect)
    return ({"atoms": (["sample", "label", "weight"], rows)},
            {"n_samples": args.n, "defect_max": float(np.max(defects))})


def cmd_project(args, rng):
    from .stick_breaking import GemParams, sample_projection
    gp = GemParams(args.alpha, args.theta)
    x = sample_projection(gp, _base(args), args.d, args.n, args.trunc_eps, rng,
                          defect=args.defect)
    header = [f"x{i + 1}" for i in range(args.d)]
    return ({"projection": (header, x.tolist())},
            {"n_samples": args.n, "mean": x.mean(axis=0).tolist(),
             "second_moment": (x**2).mean(axis=0).tolist()})


def cmd_density(args, rng):
    from .simplex import log_density_mu
    mp = _model(args)
    if not args.x:
        raise DomainError("--x is required")
    x = np.array(_floats(args.x), dtype=float)
    if x.size % mp.d:
        raise DomainError("--x must hold a multiple of d coordinates")
    x = x.reshape(-1, mp.d)
    ld = np.atleast_1d(log_density_mu(x, mp))
    header = [f"x{i + 1}" for i in range(mp.d)] + ["log_density"]
    rows = [list(xi) + [v] for xi, v in zip(x.tolist(), ld.tolist())]
    out = ld.tolist()
    return ({"density": (header, rows)}, {"log_density": out[0] if len(out) == 1 else out})


def cmd_mcmc(args, rng):
    from .simplex import ChainConfig, sample_mu_mcmc
    from .dirichlet_form import batch_stderr
    mp = _model(args)
    res = sample_mu_mcmc(mp, ChainConfig(args.n_steps, args.burn_in, args.step_scale,
                                         args.chains, args.thin), rng)
    x = res.samples
    header = [f"x{i + 1}" for i in range(mp.d)]
    se = [batch_stderr(x[:, i], args.chains if args.chains > 1 else None) for i in range(mp.d)]
    return ({"samples": (header, x.tolist())},
            {"acceptance_rate": res.acceptance_rate, "n_samples": len(x),
             "mean": x.mean(axis=0).tolist() if len(x) else [], "mean_stderr": se})


def cmd_simulate(args, rng):
    from .diffusion import SimConfig, simulate
    from .dirichlet_form import batch_stderr
    mp = _model(args)
    x0 = _floats(args.x0) if args.x0 else [1.0 / (mp.d + 1)] * mp.d
    cfg = SimConfig(args.h, args.n_steps, args.boundary_eps, args.thinning)
    tr = simulate(x0, mp, cfg, rng)
    skip = -(-args.burn_in // cfg.thinning)
    xs = tr.states[skip:]
    if len(xs) == 0:
        raise DomainError("trajectory is shorter than the burn-in")
    header = ["t"] + [f"x{i + 1}" for i in range(mp.d)]
    rows = np.column_stack([tr.times, tr.states]).tolist()
    nb = 50 if len(xs) >= 100 else None
    return ({"trajectory": (header, rows)},
            {"clamp_count": tr.clamp_count, "clamp_fraction": tr.clamp_fraction,
             "averages": xs.mean(axis=0).tolist(),
             "stderrs": [batch_stderr(xs[:, i], nb) for i in range(mp.d)]})


def _exponents(theta, d):
    return {k: fn(theta, d) for k, fn in _EXPONENTS.items()}


def _sp_setup(args, rng):
    from .inequality.superpoincare import default_family
    from .simplex import ChainConfig, sample_mu_mcmc
    mp = _model(args)
    chains = args.chains
    steps = -(-args.n_samples // chains)
    res = sample_mu_mcmc(mp, ChainConfig(steps + args.burn_in, args.burn_in, n_chains=chains),
                         rng.substream(0))
    fam = default_family(mp.d, rng.substream(1), args.n_random)
    p = _EXPONENTS[args.exponent](args.theta, mp.d)
    r = _grid(args.r_min, args.r_max, args.n_r)
    return mp, res.samples, fam, p, r, chains


def cmd_fit_rate(args, rng):
    from .inequality.superpoincare import fit_rate_constant
    mp, x, fam, p, r, nb = _sp_setup(args, rng)
    per = [(f.name, fit_rate_constant([f], mp, p, r, x, nb),
            fit_rate_constant([f], mp, p, r, x, nb, plus_one=True)) for f in fam]
    c = max(v[1] for v in per)
    c1 = max(v[2] for v in per)
    return ({"constants": (["function", "c_min", "c_min_plus_one"], per)},
            {"c": c, "c_plus_one": c1, "p": p, "exponents": _exponents(args.theta, mp.d),
             "n_samples": len(x), "n_functions": len(fam)})


def cmd_check_sp(args, rng):
    from .inequality.rates import RateFunction
    from .inequality.superpoincare import check_super_poincare, fit_rate_constant
    mp, x, fam, p, r, nb = _sp_setup(args, rng)
    c = args.c if args.c is not None else fit_rate_constant(fam, mp, p, r, x, nb)
    beta = RateFunction(c, p)
    rows, viol, viol1 = [], 0, 0
    for f in fam:
        rep = check_super_poincare(f, mp, beta, r, x, nb)
        viol += rep.violations
        viol1 += rep.violations_plus_one
        rows += [(f.name, rk, bk, m, s, m1) for rk, bk, m, s, m1 in
                 zip(r, rep.beta, rep.margins, rep.margin_stderr, rep.margins_plus_one)]
    return ({"margins": (["function", "r", "beta", "margin", "margin_stderr",
                          "margin_plus_one"], rows)},
            {"c": c, "p": p, "exponents": _exponents(args.theta, mp.d), "violations": viol,
             "violations_plus_one": viol1, "n_samples": len(x)})


def cmd_cheeger_scan(args, rng):
    from .inequality.localization import cheeger_scan, edge_profile, h_estimate
    mp = _model(args)
    s = _grid(args.s_min, args.s_max, args.n_s)
    scan = cheeger_scan(mp, s, args.n_search, rng.substream(0), iters=args.iters,
                        threads=args.threads)
    h = _pmap(lambda k: h_estimate(s[k], mp, args.n_search, rng.substream(1).substream(k),
                                   args.iters), range(len(s)), args.threads)
    _, comp, _, gen = edge_profile(mp, s)
    from .inequality.search import loglog_slope
    rows = list(zip(s, scan.a1, scan.a2, scan.lambda_lb, h, comp, gen))
    return ({"cheeger": (["s", "a1", "a2", "lambda_lb", "h", "edge_grad_component",
                          "edge_generator"], rows)},
            {"slopes": scan.slopes, "slope_h": loglog_slope(s, h),
             "slope_edge_grad_component": loglog_slope(s, comp),
             "slope_edge_generator": loglog_slope(s, gen), "flags": scan.flags})


def cmd_flux_scan(args, rng):
    from .inequality.localization import boundary_flux, cheeger_test_function
    mp = _model(args)
    r = _grid(args.r_min, args.r_max, args.n_r)
    f = cheeger_test_function()
    flux = _pmap(lambda k: boundary_flux(r[k], mp, f), range(len(r)), args.threads)
    return ({"flux": (["r", "flux"], list(zip(r, flux)))},
            {"ratio_first_last": flux[0] / flux[-1] if flux[-1] > 0 else math.inf,
             "monotone_decreasing": bool(np.all(np.diff(flux) < 0))})


def cmd_psi_scan(args, rng):
    from .inequality.perturbation import psi_estimate
    from .inequality.search import loglog_slope
    mp = _model(args)
    s = _grid(args.s_min, args.s_max, args.n_s)
    est = _pmap(lambda k: psi_estimate(3 * s[k], mp, None, args.n_search, rng.substream(k),
                                       args.s_factor, args.iters), range(len(s)), args.threads)
    psi = [e.psi for e in est]
    ew = [e.sup_exp_W for e in est]
    return ({"psi": (["s", "psi_3s", "sup_exp_W_3s"], list(zip(s, psi, ew)))},
            {"slope_psi": loglog_slope(s, psi), "sup_exp_W_spread": max(ew) / min(ew),
             "s_factor": args.s_factor})


def cmd_counterexample(args, rng):
    from .inequality.counterexample import counterexample_scan
    if args.pn == "geometric":
        pn = None
    else:
        def pn(n):
            return 1.0 / (np.asarray(n, dtype=float) + 1.0) ** 2
    res = counterexample_scan(args.theta, args.c_threshold, pn, range(args.n_min, args.n_max + 1))
    rows = list(zip(res.n, res.pn, res.I, res.I_err, res.tail_true, res.second_moment))
    return ({"counterexample": (["n", "p_n", "I_n", "I_n_error", "tail_true",
                                 "second_moment"], rows)},
            {"analytic_limit": res.analytic_limit, "integrand_limit": res.integrand_limit,
             "true_limit": res.true_limit, "min_I_n": float(np.min(res.I)),
             "min_tail_true": float(np.min(res.tail_true))})


def cmd_spectrum(args, rng):
    from .spectral import MeshSpec, assemble, eigen_spectrum
    mp = _model(args)
    if mp.d != 1:
        raise DomainError("spectrum needs d = 1")
    mesh = MeshSpec(args.n_cells, args.delta, args.grading)
    res = eigen_spectrum(assemble(mp, mesh), args.k)
    rows = list(zip(range(args.k), res.eigenvalues, res.refinement_deltas))
    return ({"spectrum": (["index", "eigenvalue", "refinement_delta"], rows)},
            {"eigenvalues": res.eigenvalues.tolist(),
             "refinement_deltas": res.refinement_deltas.tolist(),
             "mesh": {"n_cells": mesh.n_cells, "cutoff_delta": mesh.cutoff_delta,
                      "grading_exponent": mesh.grading_exponent}})


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _model_flags(p, theta=1.0):
    p.add_argument("--theta", type=float, default=theta)
    p.add_argument("--p", type=str, default=None, help="comma-separated d+1 label masses")
    p.add_argument("--d", type=int, default=None, help="dimension, default 1 (uniform p unless --p)")


def _gem_flags(p):
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--trunc-eps", type=float, default=1e-6)
    p.add_argument("--n", type=int, default=1)


def _base_flags(p):
    p.add_argument("--base", choices=["finite", "geometric", "inverse-square"], default="geometric")
    p.add_argument("--base-probs", type=str, default="0.5,0.5")
    p.add_argument("--ratio", type=float, default=0.5)


def _scan_flags(p, lo, hi, n, name="s"):
    p.add_argument(f"--{name}-min", type=float, default=lo)
    p.add_argument(f"--{name}-max", type=float, default=hi)
    p.add_argument(f"--n-{name}", type=int, default=n)


def _search_flags(p):
    p.add_argument("--n-search", type=int, default=256)
    p.add_argument("--iters", type=int, default=200)


def _sp_flags(p):
    _model_flags(p)
    p.add_argument("--n-samples", type=int, default=10**6)
    p.add_argument("--chains", type=int, default=100)
    p.add_argument("--burn-in", type=int, default=500)
    p.add_argument("--n-random", type=int, default=20)
    p.add_argument("--exponent", choices=sorted(_EXPONENTS), default="perturbation")
    _scan_flags(p, 1e-3, 10.0, 9, "r")


def build_parser():
    parser = _Parser(prog="pdlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    parser.commands = {}

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=str, default=None)
        p.add_argument("--output-dir", type=str, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        p.set_defaults(func=fn)
        parser.commands[name] = p
        return p

    p = add("sample-gem", cmd_sample_gem, "GEM stick-breaking weights")
    _gem_flags(p)
    p.add_argument("--descending", action="store_true")
    p = add("sample-dp", cmd_sample_dp, "two-parameter Dirichlet process atoms")
    _gem_flags(p)
    _base_flags(p)
    p = add("project", cmd_project, "projections (mu(1),...,mu(d)) of the Dirichlet process")
    _gem_flags(p)
    _base_flags(p)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--defect", choices=["remainder", "base"], default="remainder")
    p = add("density", cmd_density, "log-density of the projection measure")
    _model_flags(p)
    p.add_argument("--x", type=str, required=False, default=None)
    p = add("mcmc", cmd_mcmc, "Metropolis samples of the projection measure")
    _model_flags(p)
    p.add_argument("--n-steps", type=int, default=10000)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--step-scale", type=float, default=None)
    p.add_argument("--chains", type=int, default=10)
    p.add_argument("--thin", type=int, default=1)
    p = add("simulate", cmd_simulate, "Euler-Maruyama trajectory of the diffusion")
    _model_flags(p)
    p.add_argument("--x0", type=str, default=None)
    p.add_argument("--h", type=float, default=1e-4)
    p.add_argument("--n-steps", type=int, default=10**5)
    p.add_argument("--boundary-eps", type=float, default=1e-8)
    p.add_argument("--thinning", type=int, default=100)
    p.add_argument("--burn-in", type=int, default=0)
    p = add("check-sp", cmd_check_sp, "super Poincare margins on a grid of r")
    _sp_flags(p)
    p.add_argument("--c", type=float, default=None, help="rate constant (fitted if omitted)")
    p = add("fit-rate", cmd_fit_rate, "fit the rate constant c")
    _sp_flags(p)
    p = add("cheeger-scan", cmd_cheeger_scan, "a1, a2, lambda lower bound and h over s")
    _model_flags(p)
    _scan_flags(p, 1e2, 1e6, 9)
    _search_flags(p)
    p = add("flux-scan", cmd_flux_scan, "flux through the level sets phi = r")
    _model_flags(p)
    _scan_flags(p, 1e3, 1e7, 5, "r")
    p = add("psi-scan", cmd_psi_scan, "psi(3s) and sup exp(W) over s")
    _model_flags(p)
    _scan_flags(p, 1e2, 1e6, 9)
    _search_flags(p)
    p.add_argument("--s-factor", type=float, default=2.0)
    p = add("counterexample", cmd_counterexample, "tail integrals I_n of F_n^2")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--c-threshold", type=float, default=1.0)
    p.add_argument("--pn", choices=["geometric", "inverse-square"], default="geometric")
    p.add_argument("--n-min", type=int, default=5)
    p.add_argument("--n-max", type=int, default=25)
    p = add("spectrum", cmd_spectrum, "finite-element spectrum for d = 1")
    _model_flags(p)
    p.add_argument("--n-cells", type=int, default=512)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--grading", type=float, default=2.0)
    p.add_argument("--k", type=int, default=6)
    return parser


# ---------------------------------------------------------------------------
# config and output
# ---------------------------------------------------------------------------

def read_config(path):
    out = {}
    for ln, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DomainError(f"{path}:{ln}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def _config_items(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG}


def write_config(path, command, args):
    lines = [f"# pdlab {command}"]
    for k, v in _config_items(args).items():
        lines.append(f"{k}={'' if v is None else v}")
    Path(path).write_text("\n".join(lines) + "\n")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _apply_config(args, argv):
    """Defaults < config file < explicit flags."""
    if not args.config:
        return args
    parser = build_parser_cached()
    sub = parser.commands[args.command]
    cfg = read_config(args.config)
    known = {a.dest: a for a in sub._actions}
    for k in cfg:
        if k not in known or k in _NOT_CONFIG:
            raise UsageError(f"unknown config key {k!r}")
    typed = {}
    for k, v in cfg.items():
        act = known[k]
        if v == "":
            typed[k] = None
        elif isinstance(act, argparse._StoreTrueAction):
            typed[k] = v.lower() in ("1", "true", "yes")
        elif act.type is not None:
            try:
                typed[k] = act.type(v)
            except ValueError as e:
                raise UsageError(f"bad value for {k}: {v!r}") from e
        else:
            typed[k] = v
        if act.choices is not None and typed[k] is not None and typed[k] not in act.choices:
            raise UsageError(f"bad value for {k}: {v!r}")
    sub.set_defaults(**typed)
    try:
        return parser.parse_args(argv)
    finally:
        sub.set_defaults(**{k: known[k].default for k in typed})


_PARSER = None


def build_parser_cached():
    global _PARSER
    if _PARSER is None:
        _PARSER = build_parser()
    return _PARSER


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser_cached()
    try:
        args = parser.parse_args(argv)
        args = _apply_config(args, argv)
        if args.threads < 1:
            raise DomainError("--threads must be >= 1")
        flag_given = any(a == "--output-dir" or a.startswith("--output-dir=") for a in argv)
        if flag_given:
            out = Path(args.output_dir)
        elif os.environ.get(ENV_OUTPUT):
            out = Path(os.environ[ENV_OUTPUT])
        else:
            out = Path(args.output_dir or Path("pdlab-output") / args.command)
        args.output_dir = str(out)
        tables, summary = args.func(args, RngStream(args.seed))
    except UsageError as e:
        print(f"pdlab: error: {e}", file=sys.stderr)
        return 1
    except DomainError as e:
        print(f"pdlab: invalid input: {e}", file=sys.stderr)
        return 1
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"pdlab: numerical failure: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"pdlab: invalid input: {e}", file=sys.stderr)
        return 1
    out.mkdir(parents=True, exist_ok=True)
    write_config(out / "config.txt", args.command, args)
    for stem, (header, rows) in tables.items():
        write_csv(out / f"{stem}.csv", header, rows)
    summary = {"command": args.command, "seed": args.seed, **summary}
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
