"""Command-line front end.

Subcommands: `box` (full rectangle indices + eigenvalues), `invariance`
(certificate constants, optionally a full-grid scan with loss-point
classification), and `left-shelf` (renormalized crossing count plus the
monotonicity audit).  Configs are JSON files or built-in catalog names.

Exit codes: 0 success, 1 usage/config error, 2 invariance violation,
3 numeric blow-up.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import artifacts
from .errors import BlowUpError, ConfigError, InvarianceViolationError, RenoscError
from .invariance import classify_loss_point, constants_report, rho_grid_scan
from .maslovbox import compute_box, monotonicity_audit, renormalized_count
from .problems import CATALOG, builtin_catalog, load_config_file, load_problem


def _add_common(sub):
    sub.add_argument("config", help="JSON config path or catalog name "
                     f"({', '.join(CATALOG)})")
    sub.add_argument("--x-steps", type=int, default=None)
    sub.add_argument("--lambda-steps", type=int, default=None)
    sub.add_argument("--lambda", dest="lam", type=float, nargs=2, default=None,
                     metavar=("L1", "L2"), help="override the spectral interval")
    sub.add_argument("--no-rescale", action="store_true",
                     help="disable per-step column rescaling")
    sub.add_argument("--out", default="renosc-out", help="output directory")


def build_parser():
    ap = argparse.ArgumentParser(prog="renosc", description=__doc__)
    sp = ap.add_subparsers(dest="command", required=True)

    box = sp.add_parser("box", help="compute all four shelves and eigenvalues")
    _add_common(box)

    inv = sp.add_parser("invariance", help="certificate constants and rho scans")
    _add_common(inv)
    inv.add_argument("--scan", action="store_true",
                     help="also scan rho over the full grid")
    inv.add_argument("--refine", type=int, default=2,
                     help="loss-point refinement rounds (default 2)")

    left = sp.add_parser("left-shelf", help="renormalized count and audit")
    _add_common(left)
    return ap


def _load(args):
    name = args.config
    if os.path.exists(name):
        cfg = load_config_file(name)
    elif name in CATALOG:
        cfg = builtin_catalog(name)
    else:
        raise ConfigError(f"no such file or catalog entry: {name}")
    if args.x_steps:
        cfg.x_steps = args.x_steps
    if args.lambda_steps:
        cfg.lambda_steps = args.lambda_steps
    if args.lam:
        if not args.lam[0] < args.lam[1]:
            raise ConfigError("need L1 < L2")
        cfg.lam = (args.lam[0], args.lam[1])
    problem = load_problem(cfg)
    if args.no_rescale:
        problem.rescale = False
    return cfg, problem


def _emit(summary, outdir):
    artifacts.write_summary_json(os.path.join(outdir, "summary.json"), summary)
    print(json.dumps(summary, indent=2, sort_keys=True))


def cmd_box(args) -> int:
    cfg, problem = _load(args)
    outdir = artifacts.ensure_outdir(args.out)
    report = compute_box(problem)
    for shelf, samples in report.shelf_samples.items():
        artifacts.write_path_csv(os.path.join(outdir, f"shelf_{shelf}.csv"), samples)
    artifacts.write_rows_csv(
        os.path.join(outdir, "crossings.csv"), "x",
        [(x,) for x in report.left_crossings],
    )
    artifacts.write_rows_csv(
        os.path.join(outdir, "eigenvalues.csv"), "lambda",
        [(v,) for v in report.eigenvalues],
    )
    # full-grid spectral curve for the figure
    from .invariance import _psi_grids

    psi1, _, _ = _psi_grids(problem)
    artifacts.write_box_svg(
        os.path.join(outdir, "box.svg"), problem.lambda_grid(), problem.x_grid(),
        psi1, crossings=report.left_crossings, eigenvalues=report.eigenvalues,
        title=f"spectral curve ({args.config})",
    )
    summary = {"command": "box", "config": cfg.to_dict(), **report.to_dict()}
    _emit(summary, outdir)
    return 0


def cmd_invariance(args) -> int:
    cfg, problem = _load(args)
    outdir = artifacts.ensure_outdir(args.out)
    report = constants_report(problem)
    summary = {"command": "invariance", "config": cfg.to_dict(),
               "constants": report.to_dict()}
    if args.scan:
        scan = rho_grid_scan(problem, refine_rounds=args.refine)
        classified = []
        for p in scan.loss_points:
            try:
                classified.append(
                    classify_loss_point(problem, p, others=tuple(scan.loss_points))
                )
            except RenoscError as exc:
                p.flagged = True
                p.note = str(exc)
                classified.append(p)
        scan.loss_points = classified
        artifacts.write_grid_csv(
            os.path.join(outdir, "rho_grid.csv"), scan.lam_axis, scan.x_axis, scan.rho
        )
        artifacts.write_heatmap_svg(
            os.path.join(outdir, "rho_heatmap.svg"), scan.lam_axis, scan.x_axis,
            scan.rho, loss_points=scan.loss_points,
            title=f"rho over the box ({args.config})",
        )
        summary["scan"] = scan.to_dict()
    _emit(summary, outdir)
    return 0


def cmd_left_shelf(args) -> int:
    cfg, problem = _load(args)
    outdir = artifacts.ensure_outdir(args.out)
    count, xs = renormalized_count(problem)
    ratios = monotonicity_audit(problem)
    from .maslovbox import shelf_path

    artifacts.write_path_csv(
        os.path.join(outdir, "left_shelf.csv"), shelf_path(problem, "left")
    )
    artifacts.write_rows_csv(
        os.path.join(outdir, "audit.csv"), "x,ratio", ratios
    )
    summary = {
        "command": "left-shelf", "config": cfg.to_dict(),
        "count": count, "crossings": xs,
        "audit_ratios": [list(r) for r in ratios],
    }
    _emit(summary, outdir)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "box":
            return cmd_box(args)
        if args.command == "invariance":
            return cmd_invariance(args)
        return cmd_left_shelf(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BlowUpError as exc:
        print(f"numeric blow-up: {exc}", file=sys.stderr)
        return 3
    except InvarianceViolationError as exc:
        where = f" (shelf {exc.shelf}, node {exc.node})" if exc.shelf else ""
        print(f"invariance violation: {exc}{where}", file=sys.stderr)
        return 2
    except RenoscError as exc:
        # structural assertions and unresolvable refinements also invalidate
        # the run's indices
        print(f"invariance violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
