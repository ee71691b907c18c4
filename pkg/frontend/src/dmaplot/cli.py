"""Figure-rendering CLI.

    plot --spec figure.json
    plot --kind rate-vs-N --csv results.csv --out fig.png [--schemes a,b]

Exits nonzero with the offending column or filter message on bad input.
"""

from __future__ import annotations

import argparse
import sys

from .plots import FIGURE_KINDS, PlotError, PlotSpec, load_spec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot", description="Render figures from simulator CSV exports")
    parser.add_argument("--spec", help="JSON plot spec path")
    parser.add_argument("--kind", choices=FIGURE_KINDS)
    parser.add_argument("--csv", action="append", default=[],
                        help="input CSV (repeatable)")
    parser.add_argument("--out", help="output image path")
    parser.add_argument("--schemes", help="comma-separated scheme filter")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.spec:
            spec = load_spec(args.spec)
        else:
            if not (args.kind and args.csv and args.out):
                raise PlotError("either --spec or all of --kind/--csv/--out "
                                "are required")
            schemes = [s for s in (args.schemes or "").split(",") if s]
            spec = PlotSpec(csv=args.csv, kind=args.kind, out=args.out,
                            schemes=schemes)
        out = render(spec)
        print(out)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
