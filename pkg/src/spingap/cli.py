"""Batch experiment harness.

Subcommands wire the library into reproducible experiments: each run
reads one TOML config, executes deterministically per seed, and writes
CSV tables plus a JSON manifest (inputs, constants, versions, wall
time). Exit codes: 0 success, 2 validation error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, config as cfgmod
from .chaos import mc_tail
from .errors import ConfigError, NumericError, ValidationError
from .measure1d import stats as measure_stats
from .spectral import (gap_1d, gap_autocorr, gap_hyperplane_n2,
                       gap_rayleigh_linear)
from .spin import (SpinSystemSpec, choose_w0, kawasaki_sampler, l4_ratio_bound,
                   lsi_report, mc_lp_ratio, rng_stream, sg_report)
from .transference import (ls_transfer_constant, profile_from_lsi,
                           sg_transfer_lp, sg_transfer_median, sg_transfer_tv,
                           transfer_integral)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path: Path, header, rows):
    """Deterministic CSV: '.' decimals, repr-roundtrip floats, sorted rows
    are the caller's responsibility."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_manifest(path: Path, cfg, constants, seeds, outputs, t0, extra=None):
    manifest = {
        "config": cfg,
        "constants": constants.as_dict(),
        "seeds": list(seeds),
        "outputs": [str(o) for o in outputs],
        "versions": {
            "spingap": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "wall_time_s": round(time.time() - t0, 3),
    }
    if extra:
        manifest.update(extra)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


# -- gap-scan ----------------------------------------------------------------------


def _gap_scan_point(site_cfg, n, s_list, seed, sweeps, grid_size):
    """One (n, seed) scan over mean-spins with a fixed, site-intrinsic
    proposal scale (same local dynamics at every s, so rate ratios track
    the generator's gap ratios)."""
    site = cfgmod.build_site(site_cfg)
    rows = []
    scale = 0.5 * math.sqrt(site.var)
    for s in s_list:
        spec = SpinSystemSpec(n=n, site=site, s=float(s))
        trace = kawasaki_sampler(spec, sweeps, proposal_scale=scale,
                                 seed=seed * 1_000_003 + n, tune=False)
        if n == 2:
            est = gap_hyperplane_n2(site, float(s), grid_size)
            rows.append((n, float(s), seed, "eig1d", est.value, est.error))
        ray = gap_rayleigh_linear(trace)
        rows.append((n, float(s), seed, "rayleigh_linear", ray.value, ray.error))
        ac = gap_autocorr(trace)
        rows.append((n, float(s), seed, "autocorr", ac.value, ac.error))
    return rows


def cmd_gap_scan(cfg, constants, seeds, out_dir, workers):
    system = cfg.get("system", {})
    n_list = [int(n) for n in system.get("n", [2, 4, 8])]
    s_list = [float(s) for s in system.get("s", [0.0, 1.0, 2.0, 4.0])]
    run = cfg.get("run", {})
    sweeps = int(run.get("sweeps", 100_000))
    grid_size = int(run.get("grid_size", 2000))
    tasks = [(cfg["site"], n, s_list, seed, sweeps, grid_size)
             for n in n_list for seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_gap_scan_worker, tasks))
    else:
        chunks = [_gap_scan_point(*t) for t in tasks]
    rows = sorted(r for chunk in chunks for r in chunk)
    path = out_dir / "gap_scan.csv"
    write_csv(path, ["n", "s", "seed", "method", "gap", "error"], rows)
    return [path], {}


def _gap_scan_worker(task):
    return _gap_scan_point(*task)


# -- ratio-scan ---------------------------------------------------------------------


def _ratio_scan_point(site_cfg, n, w_cfg, p, samples, seed, delta):
    site = cfgmod.build_site(site_cfg)
    st = measure_stats(site, delta)
    w = cfgmod.resolve_width({"w": w_cfg}, st)
    spec = SpinSystemSpec(n=n, site=site, w=w)
    est = mc_lp_ratio(spec, p, samples, seed=seed)
    bound = l4_ratio_bound("two_sided", st) if p == 4.0 else float("nan")
    return (n, p, w, seed, est.value, est.stderr, est.ze, est.ze_stderr, bound)


def _ratio_scan_worker(task):
    return _ratio_scan_point(*task)


def cmd_ratio_scan(cfg, constants, seeds, out_dir, workers):
    system = cfg.get("system", {})
    n_list = [int(n) for n in system.get("n", [4, 16, 64, 256])]
    run = cfg.get("run", {})
    samples = int(run.get("samples", 100_000))
    p = float(run.get("p", 4.0))
    delta = float(run.get("delta", 1.0))
    w_cfg = system.get("w", "auto")
    tasks = [(cfg["site"], n, w_cfg, p, samples, seed, delta)
             for n in n_list for seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_ratio_scan_worker, tasks))
    else:
        rows = [_ratio_scan_point(*t) for t in tasks]
    rows.sort()
    path = out_dir / "ratio_scan.csv"
    write_csv(path, ["n", "p", "w", "seed", "value", "stderr",
                     "ze", "ze_stderr", "l4_bound"], rows)
    return [path], {}


# -- lsi-report ----------------------------------------------------------------------


def cmd_lsi_report(cfg, constants, seeds, out_dir, workers):
    from .measure1d import bakry_emery_lsi

    site = cfgmod.build_site(cfg["site"])
    run = cfg.get("run", {})
    delta = float(run.get("delta", 1.0))
    st = measure_stats(site, delta)
    rho = cfg.get("lsi", {}).get("rho")
    if rho is None:
        rho = bakry_emery_lsi(site.potential)
        if rho is None:
            raise NumericError("no certified LSI lower bound for this site; "
                               "set [lsi].rho explicitly")
    rho = float(rho)
    system = cfg.get("system", {})
    n = int(system.get("n", [8])[0]) if isinstance(system.get("n"), list) else int(system.get("n", 8))
    a = cfgmod.build_interaction(system, n)
    spec = SpinSystemSpec(n=n, site=site, a_matrix=a,
                          b=cfgmod.build_boundary(system, n))
    rows = []
    variants = ["one_sided", "two_sided"] + (["interacting"] if a is not None else [])
    for variant in variants:
        rep = lsi_report(spec, st, rho, constants, variant=variant)
        w0 = choose_w0(st, variant if variant != "interacting" else "two_sided")
        l4 = l4_ratio_bound(
            variant if variant != "interacting" else "interacting", st, constants,
            a_op=spec.a_op, a_hs=spec.a_hs, rho=rho)
        rows.append((variant, rho, rep["Q"], rep["bound"], w0, l4))
    sg = sg_report(spec, st, rho_s=rho, consts=constants)
    path = out_dir / "lsi_report.csv"
    write_csv(path, ["variant", "rho", "Q", "bound", "w0", "l4_bound"], rows)
    return [path], {"sg_report": sg}


# -- tilt-solve ----------------------------------------------------------------------


def cmd_tilt_solve(cfg, constants, seeds, out_dir, workers):
    from .tilt import TiltProblem, fixed_point_solve, reduce_to_zero_spin

    site = cfgmod.build_site(cfg["site"])
    system = cfg.get("system", {})
    n = int(system.get("n", 2)) if not isinstance(system.get("n"), list) else int(system["n"][0])
    a = cfgmod.build_interaction(system, n)
    if a is None:
        a = np.zeros((n, n))
    b = cfgmod.build_boundary(system, n)
    s = float(system.get("s", 0.0)) if not isinstance(system.get("s"), list) else float(system["s"][0])
    problem = TiltProblem(site=site, a_matrix=a, b=b, s=s)
    sol = fixed_point_solve(problem, tol=float(cfg.get("tilt", {}).get("tol", 1e-10)))
    u = reduce_to_zero_spin(problem, sol)
    rows = [(i, float(sol.t[i]), float(u[i])) for i in range(n)]
    path = out_dir / "tilt_solution.csv"
    write_csv(path, ["i", "t_i", "u_i"], rows)
    extra = {"tilt": {
        "u0": sol.u0, "residual": sol.residual, "iterations": sol.iterations,
        "contraction_observed": sol.contraction_observed,
        "contraction_bound": 2.0 * problem.m2_bar * problem.a_op,
        "m2_bar": problem.m2_bar,
    }}
    return [path], extra


# -- transfer-calc --------------------------------------------------------------------


def cmd_transfer_calc(cfg, constants, seeds, out_dir, workers):
    tr = cfg.get("transfer", {})
    rho = float(tr.get("rho", 1.0))
    kappa = float(tr.get("kappa", 0.0))
    l = float(tr.get("l", 1.0))
    p = float(tr.get("p", 4.0))
    radii = tr.get("radii", [float(r) / 2.0 for r in range(0, 25)])

    const_rows = [
        ("ls_transfer_constant", ls_transfer_constant(rho, kappa, l, p, constants)),
        ("sg_transfer_lp", sg_transfer_lp(max(l, 1.0), p, constants)),
        ("sg_transfer_median", sg_transfer_median(max(l, 7.0 / 8.0), constants)),
    ]
    if l > 1.0:
        const_rows += [(f"sg_transfer_tv_{case}", sg_transfer_tv(case, l, constants))
                       for case in ("sup_ratio", "inv_sup_ratio", "tv")]
    path1 = out_dir / "transfer_constants.csv"
    write_csv(path1, ["constant", "value"], const_rows)

    base = profile_from_lsi(rho)
    transferred = transfer_integral(base, lambda x: x ** (p - 1.0), l ** p)
    prow = [(float(r), float(base(r)), float(transferred(r))) for r in radii]
    path2 = out_dir / "transfer_profile.csv"
    write_csv(path2, ["r", "source_profile", "transferred_bound"], prow)
    return [path1, path2], {}


# -- chaos-tail ------------------------------------------------------------------------


def cmd_chaos_tail(cfg, constants, seeds, out_dir, workers):
    site = cfgmod.build_site(cfg["site"])
    ch = cfg.get("chaos", {})
    n = int(ch.get("n", 32))
    hs = float(ch.get("hs", 1.0))
    reps = int(ch.get("reps", 1_000_000))
    rho = float(ch.get("rho", 1.0))
    thr = ch.get("thresholds", {"lo": 0.2, "hi": 8.0, "count": 24})
    if isinstance(thr, dict):
        thresholds = np.linspace(float(thr["lo"]), float(thr["hi"]), int(thr["count"]))
    else:
        thresholds = np.asarray([float(t) for t in thr])
    rows = []
    fitted = {}
    for seed in seeds:
        rng = rng_stream(seed, 6)
        m = rng.standard_normal((n, n))
        a = 0.5 * (m + m.T)
        np.fill_diagonal(a, 0.0)
        a *= hs / np.linalg.norm(a)
        tb = mc_tail("chaos", a, site, thresholds, reps, seed=seed, rho=rho,
                     consts=constants)
        fitted[str(seed)] = tb.fitted_c
        for i, t in enumerate(thresholds):
            rows.append((seed, float(t), float(tb.bound_values[i]),
                         float(tb.empirical[i]), float(tb.stderr[i])))
    rows.sort()
    path = out_dir / "chaos_tail.csv"
    write_csv(path, ["seed", "t", "bound", "empirical", "stderr"], rows)
    return [path], {"fitted_c": fitted}


# -- facts-suite -----------------------------------------------------------------------


FACTS_CORPUS = ("gaussian", "two_sided_exp", "power:1.5", "power:3", "uniform")


def _facts_for(name):
    if ":" in name:
        fam, arg = name.split(":")
        site_cfg = {"family": fam, "p": float(arg)}
    else:
        site_cfg = {"family": name}
    site = cfgmod.build_site(site_cfg)
    gap = gap_1d(site, 2000).value
    var = site.var
    grid = np.linspace(*site.window, 8193)
    dens = np.asarray(site.density(grid), float)
    f0 = float(site.density(np.array([site.barycenter]))[0])
    fsup = float(dens.max())
    rows = [
        (name, "gap_times_var", gap * var, 0.2, 4.0),
        (name, "density_at_mean_vs_sup", f0 / fsup, 1.0 / math.e, math.inf),
        (name, "sup_sq_times_var", fsup ** 2 * var, 0.05, 1.0),
    ]
    for (pp, qq) in ((1.0, 2.0), (2.0, 4.0)):
        lhs = site.moment(qq) ** (1.0 / qq)
        rhs = 3.0 * (qq / pp) * site.moment(pp) ** (1.0 / pp)
        rows.append((name, f"moment_ratio_{int(pp)}_{int(qq)}", lhs / rhs, 0.0, 1.0))
    return rows


def cmd_facts_suite(cfg, constants, seeds, out_dir, workers):
    corpus = cfg.get("facts", {}).get("corpus", list(FACTS_CORPUS))
    rows = []
    for name in corpus:
        for (nm, fact, value, lo, hi) in _facts_for(name):
            rows.append((nm, fact, value, lo, hi, lo <= value <= hi))
    rows.sort(key=lambda r: (r[0], r[1]))
    path = out_dir / "facts_suite.csv"
    write_csv(path, ["family", "fact", "value", "lo", "hi", "passed"], rows)
    if not all(r[5] for r in rows):
        raise NumericError("log-concave facts suite has failures; see facts_suite.csv")
    return [path], {}


COMMANDS = {
    "gap-scan": cmd_gap_scan,
    "ratio-scan": cmd_ratio_scan,
    "lsi-report": cmd_lsi_report,
    "tilt-solve": cmd_tilt_solve,
    "transfer-calc": cmd_transfer_calc,
    "chaos-tail": cmd_chaos_tail,
    "facts-suite": cmd_facts_suite,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spingap",
        description="Spectral-gap / log-Sobolev experiment harness for "
                    "conservative spin systems.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=(name != "transfer-calc"),
                       help="TOML run configuration")
        p.add_argument("--seed", type=int, action="append", default=None,
                       help="seed (repeatable); default [0]")
        p.add_argument("--out", default=None, help="output directory "
                       "(default $SPINGAP_OUT or ./spingap_out)")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--set", dest="sets", action="append", default=None,
                       metavar="KEY=VALUE", help="config override, e.g. "
                       "constants.c_ls=2.0")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.time()
    try:
        cfg = cfgmod.load_config(args.config) if args.config else {"schema": 1}
        cfgmod.apply_overrides(cfg, args.sets)
        constants = cfgmod.build_constants(cfg)
        seeds = args.seed if args.seed else [int(s) for s in cfg.get("run", {}).get("seeds", [0])]
        if not seeds:
            raise ConfigError("need at least one seed")
        out_dir = Path(args.out or os.environ.get("SPINGAP_OUT", "spingap_out"))
        out_dir.mkdir(parents=True, exist_ok=True)
        outputs, extra = COMMANDS[args.command](cfg, constants, seeds, out_dir,
                                                max(1, args.workers))
        write_manifest(out_dir / "manifest.json", cfg, constants, seeds,
                       outputs, t0, extra)
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    for path in outputs:
        print(path)
    print(out_dir / "manifest.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
