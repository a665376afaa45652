"""Command-line harness: generate instances, run solvers, search radii, write CSV/JSON.

Subcommands ``cs`` and ``blur`` run one instance; ``sweep`` runs a grid of
(solver, eta, seed, radius) cells; ``replay`` re-runs a saved manifest.
Exit status is 0 on success, 1 on usage errors and 2 on numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    TRACE_COLUMNS,
    ConfigurationError,
    ContractViolation,
    Objective,
    SolverConfig,
    Termination,
    _json_default,
)
from .diagnostics import check_assumptions
from .problems import BlurSpec, CsSpec, blur_stats, generate_blur, generate_cs
from .selection import DiscrepancyNotReached, search_alpha, search_radius, write_probe_csv
from .solvers import SOLVERS, get_solver

OUTPUT_ENV = "L1L2PG_OUTPUT_DIR"
DEFAULT_OUTPUT = "l1l2pg-out"
SWEEP_COLUMNS = ("family", "solver", "eta", "seed", "radius", "rerror", "discrepancy", "iterations",
                 "seconds", "termination")
MEDIAN_COLUMNS = ("solver", "eta", "radius", "median_rerror", "cells")

# per-family defaults for flags left unset on the command line
FAMILY_DEFAULTS = {
    "cs": {"alpha": 0.02, "eta": 1.0, "radius": 16.0, "max_iters": 5000, "r0": 10.0, "c": 1.0},
    "blur": {"alpha": 0.2, "eta": 0.7, "radius": 2111.0, "max_iters": 1000, "r0": 2000.0, "c": 5.0},
}
SOLVER_CHOICES = tuple(SOLVERS) + ("all",)
ALL_SOLVERS = ("st", "pg-gcgm", "pg-sf")


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--snr-db", type=float, default=50.0)
    g.add_argument("--noise-reference", choices=("absolute", "measured"), default="absolute")
    g.add_argument("--alpha", type=float)
    g.add_argument("--eta", type=float)
    g.add_argument("--lambda", dest="lam", type=float, default=1.0)
    g.add_argument("--radius", type=float)
    g.add_argument("--tau1", type=float, default=1.01)
    g.add_argument("--tau2", type=float, default=1.2)
    g.add_argument("--one-sided", action="store_true", help="upper discrepancy bound at infinity")
    g.add_argument("--solver", choices=SOLVER_CHOICES, default="pg-gcgm")
    g.add_argument("--objective", choices=("J", "D"), help="line-search objective for pg-gcgm")
    g.add_argument("--max-iters", type=int)
    g.add_argument("--step-tol", type=float, default=1e-8)
    g.add_argument("--search-radius", action="store_true")
    g.add_argument("--search-alpha", action="store_true", help="halve alpha until the band is met (st)")
    g.add_argument("--r0", type=float)
    g.add_argument("--c", type=float)
    g.add_argument("--probe-budget", type=int, default=200)
    g.add_argument("--cold-start", action="store_true", help="solve every probe from x0")
    g.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    g.add_argument("--strict", action="store_true",
                   help="exit 2 when a solve exhausts its budget or the band is never entered")


def _add_cs_flags(p):
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--m", type=int, default=80)
    p.add_argument("--s", type=int, default=16)
    p.add_argument("--amplitude", choices=("sign", "gaussian"), default="sign")
    p.add_argument("--no-rescale", action="store_true")


def _add_blur_flags(p):
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--band", type=int, default=3)
    p.add_argument("--tau", type=float, default=0.7)


def build_parser():
    parser = _Parser(prog="l1l2pg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    cs = sub.add_parser("cs", help="Gaussian compressive-sensing instance")
    _add_cs_flags(cs)
    _add_solver_flags(cs)

    blur = sub.add_parser("blur", help="separable Gaussian blur instance")
    _add_blur_flags(blur)
    _add_solver_flags(blur)
    blur.add_argument("--stats-only", action="store_true", help="print operator norm and condition number")

    sw = sub.add_parser("sweep", help="grid over solvers, eta, seeds and radii")
    sw.add_argument("family", choices=("cs", "blur"))
    sw.add_argument("--etas", type=_float_list, default=[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.7, 0.9, 1.0])
    sw.add_argument("--seeds", type=int, default=20, help="number of seeds, starting at --seed")
    sw.add_argument("--radii", type=_float_list, help="radius sweep instead of the fixed --radius")
    sw.add_argument("--solvers", type=_solver_list, default=list(ALL_SOLVERS))
    sw.add_argument("--jobs", type=int, default=1)
    sw.add_argument("--n", type=int)
    sw.add_argument("--m", type=int)
    sw.add_argument("--s", type=int)
    sw.add_argument("--band", type=int, default=3)
    sw.add_argument("--tau", type=float, default=0.7)
    _add_solver_flags(sw)

    rp = sub.add_parser("replay", help="re-run a manifest.json written by an earlier run")
    rp.add_argument("manifest")
    rp.add_argument("--out")
    return parser


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _solver_list(text):
    names = [v.strip() for v in text.split(",") if v.strip()]
    bad = [v for v in names if v not in SOLVERS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown solver(s): {', '.join(bad)}")
    return names


# --- helpers ------------------------------------------------------------------------

def _output_dir(args):
    out = args.out or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _fill_defaults(args, family):
    for k, v in FAMILY_DEFAULTS[family].items():
        if getattr(args, k, None) is None:
            setattr(args, k, v)


def _config(args):
    tau2 = math.inf if args.one_sided else args.tau2
    return SolverConfig(
        alpha=args.alpha, eta=args.eta, lam=args.lam, radius=args.radius,
        tau1=args.tau1, tau2=tau2, max_outer_iters=args.max_iters, step_tol=args.step_tol,
        objective=Objective.L1BALL_CONSTRAINED if args.objective == "D" else None,
    )


def _write_trace(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in trace.rows():
            w.writerow({k: ("" if v is None else v) for k, v in row.items()})


def _write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default, allow_nan=True)
        fh.write("\n")


def _write_rows(rows, columns, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def _run_one(p, cfg, name, args, outdir):
    """Solve with one method (optionally after a parameter search); return its summary dict."""
    summary = {"solver": name}
    warm = not args.cold_start
    if args.search_radius and name in ("pg-gcgm", "pg-sf"):
        res = search_radius(p, cfg, name, R0=args.r0, c=args.c, budget=args.probe_budget,
                            warm_start="auto" if warm else False)
        write_probe_csv(res.probes, outdir / f"{name}_probes.csv")
        summary.update(chosen_radius=res.chosen_radius, radius_satisfied=res.satisfied,
                       probes=len(res.probes))
        if not res.satisfied and args.strict:
            raise NumericalFailure(f"{name}: radius search did not bracket the discrepancy band")
        cfg = cfg.with_(radius=res.chosen_radius)
    elif args.search_alpha and name in ("st", "ista"):
        try:
            alpha, _ = search_alpha(p, cfg, cfg.alpha, budget=args.probe_budget, warm_start=warm,
                                    solver=get_solver(name))
        except DiscrepancyNotReached as exc:
            write_probe_csv(exc.probes, outdir / f"{name}_probes.csv")
            if args.strict:
                raise NumericalFailure(str(exc))
            summary.update(alpha_search_failed=True)
        else:
            summary.update(chosen_alpha=alpha)
            cfg = cfg.with_(alpha=alpha)
    out = get_solver(name)(p, cfg)
    _write_trace(out.trace, outdir / f"{name}_trace.csv")
    tr = out.trace
    report = check_assumptions(p, cfg, trace_iterates=tr.l2norm[1:])
    summary.update(
        radius=cfg.radius,
        alpha=cfg.alpha,
        beta=cfg.beta,
        termination=out.termination.name,
        iterations=out.stats["outer_iterations"],
        seconds=tr.seconds[-1],
        final_rerror=tr.rerror[-1],
        final_discrepancy=tr.discrepancy[-1],
        final_l1norm=tr.l1norm[-1],
        stats=out.stats,
        assumptions=report.to_dict(),
    )
    if args.strict and out.termination is Termination.BUDGET_EXHAUSTED:
        raise NumericalFailure(f"{name}: iteration budget exhausted without convergence")
    return summary


def _instance(args, family):
    if family == "cs":
        spec = CsSpec(n=args.n, m=args.m, s=args.s, snr_db=args.snr_db, seed=args.seed,
                      rescale_to_unit_norm=not args.no_rescale, amplitude=args.amplitude,
                      noise_reference=args.noise_reference)
        return generate_cs(spec)
    spec = BlurSpec(n=args.n, band=args.band, tau=args.tau, snr_db=args.snr_db, seed=args.seed,
                    noise_reference=args.noise_reference)
    return generate_blur(spec)


def _manifest(argv, command, args, cfg=None, instance=None):
    """Everything needed to re-run: the argv (minus ``--out``) plus the resolved settings."""
    # strip --out so a replay writes wherever it is told to
    clean, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        clean.append(a)
    return {
        "format": "l1l2pg-manifest",
        "version": __version__,
        "command": command,
        "argv": clean,
        "seed": getattr(args, "seed", None),
        "config": None if cfg is None else cfg.to_dict(),
        "instance": instance,
        "flags": {k: v for k, v in vars(args).items() if k != "out"},
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


# --- subcommands ----------------------------------------------------------------------

def cmd_single(args, argv):
    family = args.command
    if family == "blur" and args.stats_only:
        from .problems import blur_operator
        stats = blur_stats(blur_operator(args.n, args.band, args.tau))
        print(json.dumps(stats, default=_json_default))
        return 0
    _fill_defaults(args, family)
    cfg = _config(args)
    p = _instance(args, family)
    outdir = _output_dir(args)
    names = ALL_SOLVERS if args.solver == "all" else (args.solver,)
    results = [_run_one(p, cfg, name, args, outdir) for name in names]
    summary = {
        "family": family,
        "instance": {"shape": [p.m, p.n], "delta": p.delta, **p.meta},
        "config": cfg.to_dict(),
        "runs": results,
    }
    if family == "blur":
        summary["operator"] = blur_stats(p.operator)
    _write_json(summary, outdir / "summary.json")
    _write_json(_manifest(argv, family, args, cfg, summary["instance"]), outdir / "manifest.json")
    for r in results:
        line = f"{r['solver']}: rerror={r['final_rerror']:.4g} discrepancy/delta={r['final_discrepancy'] / p.delta:.4g}"
        if "chosen_radius" in r:
            line += f" R={r['chosen_radius']:g}"
        if "chosen_alpha" in r:
            line += f" alpha={r['chosen_alpha']:g}"
        print(line)
    print(f"wrote {outdir}")
    return 0


def _sweep_cell(cell):
    family, ns, solver, eta, seed, radius = cell
    args = argparse.Namespace(**ns)
    args.seed, args.eta = seed, eta
    if radius is not None:
        args.radius = radius
    p = _instance(args, family)
    cfg = _config(args)
    out = get_solver(solver)(p, cfg)
    tr = out.trace
    return {
        "family": family, "solver": solver, "eta": eta, "seed": seed, "radius": cfg.radius,
        "rerror": tr.rerror[-1], "discrepancy": tr.discrepancy[-1],
        "iterations": out.stats["outer_iterations"], "seconds": tr.seconds[-1],
        "termination": out.termination.name,
    }


def cmd_sweep(args, argv):
    family = args.family
    base = CsSpec() if family == "cs" else BlurSpec()
    if family == "cs":
        args.n = args.n or base.n
        args.m = args.m or base.m
        args.s = args.s or base.s
        args.amplitude, args.no_rescale = "sign", False
    else:
        args.n = args.n or base.n
    _fill_defaults(args, family)
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    _config(args)  # validate before spawning workers
    ns = {k: v for k, v in vars(args).items() if k not in ("etas", "radii", "solvers", "jobs", "family")}
    radii = args.radii or [None]
    seeds = range(args.seed, args.seed + args.seeds)
    cells = [(family, ns, s, eta, seed, r) for s in args.solvers for eta in args.etas
             for r in radii for seed in seeds]
    if args.jobs == 1:
        rows = [_sweep_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_cell, cells))  # map keeps submission order
    outdir = _output_dir(args)
    _write_rows(rows, SWEEP_COLUMNS, outdir / "sweep.csv")
    med = []
    for s in args.solvers:
        for eta in args.etas:
            for r in radii:
                vals = [row["rerror"] for row in rows
                        if row["solver"] == s and row["eta"] == eta and (r is None or row["radius"] == r)]
                med.append({"solver": s, "eta": eta, "radius": "" if r is None else r,
                            "median_rerror": statistics.median(vals), "cells": len(vals)})
    _write_rows(med, MEDIAN_COLUMNS, outdir / "median.csv")
    _write_json(_manifest(argv, "sweep", args, _config(args)), outdir / "manifest.json")
    for row in med:
        tag = f" R={row['radius']:g}" if row["radius"] != "" else ""
        print(f"{row['solver']:8s} eta={row['eta']:<4g}{tag} median rerror={row['median_rerror']:.4g}")
    print(f"wrote {outdir}")
    return 0


def cmd_replay(args, argv):
    try:
        with open(args.manifest) as fh:
            man = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read manifest: {exc}")
    if man.get("format") != "l1l2pg-manifest" or not isinstance(man.get("argv"), list):
        raise UsageError("not an l1l2pg manifest")
    new = list(man["argv"])
    if args.out:
        new += ["--out", args.out]
    return main(new)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if args.command == "replay":
            return cmd_replay(args, argv)
        if args.command == "sweep":
            return cmd_sweep(args, argv)
        return cmd_single(args, argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ContractViolation, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
