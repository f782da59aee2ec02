"""Command-line front end: qflow-viz snapshot|energy."""

from __future__ import annotations

import argparse
import sys

from .frames import ParseError
from .render import DEFAULT_STRIDE, render_energy, render_snapshot


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qflow-viz",
        description="Render qflow CSV outputs into heatmap and energy figures.")
    sub = parser.add_subparsers(dest="command", required=True)

    snap = sub.add_parser("snapshot",
                          help="order-parameter heatmap with director overlay")
    snap.add_argument("csv", help="snapshot CSV file")
    snap.add_argument("-o", "--out", required=True, help="output PNG path")
    snap.add_argument("--stride", type=int, default=DEFAULT_STRIDE,
                      help=f"draw every Nth node's director (default {DEFAULT_STRIDE})")

    en = sub.add_parser("energy", help="total-energy decay curves")
    en.add_argument("csv", nargs="+", help="one or more energy CSV files")
    en.add_argument("-o", "--out", required=True, help="output PNG path")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "snapshot":
            render_snapshot(args.csv, args.out, quiver_stride=args.stride)
        else:
            render_energy(args.csv, args.out)
    except (ParseError, FileNotFoundError, ValueError) as err:
        print(f"qflow-viz: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
