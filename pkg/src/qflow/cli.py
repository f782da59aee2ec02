"""Command-line front end for the experiment drivers.

Usage: qflow run|converge-space|converge-time|cfl|tactoid --config FILE
       [--out DIR] [--paper-scale]
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .mesh import MeshFormatError
from .solver import FixedPointError

_HELP = {
    "run": "single flow on one mesh; writes energy.csv and snapshots",
    "converge-space": "spatial refinement table against a fine reference mesh",
    "converge-time": "temporal refinement table against a small-dt reference",
    "cfl": "largest stable dt per mesh width by bisection",
    "tactoid": "disk-domain tactoid relaxation with defect count",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qflow",
        description="Gradient-flow experiments for a quartic-elasticity Q-tensor model.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in _HELP.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", required=True, help="TOML experiment file")
        p.add_argument("--out", default=None,
                       help="output directory (overrides the [output] section)")
        p.add_argument("--paper-scale", action="store_true",
                       help="apply the [*.paper] overlay tables (long runs)")
    return parser


def _print_convergence(rows) -> None:
    print(f"{'param':>12} {'field_error':>14} {'order':>8} {'energy_error':>14} {'order':>8}")
    for r in rows:
        fo = "-" if r.field_order is None else f"{r.field_order:.4f}"
        eo = "-" if r.energy_order is None else f"{r.energy_order:.4f}"
        print(f"{r.param:>12g} {r.field_error:>14.4e} {fo:>8} {r.energy_error:>14.4e} {eo:>8}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = harness.load_config(args.config, paper_scale=args.paper_scale,
                                  kind=args.command, out_dir=args.out)
        if args.command == "run":
            report = harness.run_single(cfg, verbose=True)
            print(f"final energy {report.energies[-1].total:.10g} "
                  f"after {report.n_steps} steps ({report.wall_time_s:.1f}s)")
        elif args.command == "converge-space":
            _print_convergence(harness.converge_space(cfg, verbose=True))
        elif args.command == "converge-time":
            _print_convergence(harness.converge_time(cfg, verbose=True))
        elif args.command == "cfl":
            rows = harness.cfl_search(cfg, verbose=True)
            print(f"{'h':>10} {'dt_max':>14} {'order':>8}")
            for h, dt_max, order in rows:
                o = "-" if order is None else f"{order:.4f}"
                print(f"{h:>10g} {dt_max:>14.6e} {o:>8}")
        elif args.command == "tactoid":
            report, snaps = harness.tactoid_run(cfg, verbose=True)
            thr = harness.defect_threshold(cfg.params)
            defects = harness.count_defects(report.final, thr)
            print(f"final energy {report.energies[-1].total:.10g}, "
                  f"{len(defects)} defect(s) below lambda_+ = {thr:.6g} "
                  f"({report.wall_time_s:.1f}s)")
    except FixedPointError as err:
        print(f"qflow: {err}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError, MeshFormatError) as err:
        print(f"qflow: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
