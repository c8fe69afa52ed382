"""Command line: ``plotkit lines|heatmap --csv <path>... --out <img>``.

Column mappings default to the simulator's CSV schemas and are autodetected
from the header (rate sweeps vs BER sweeps); flags override them. Markers are
given as ``--users x,y [x,y ...]`` and ``--eve x,y``.
"""

from __future__ import annotations

import argparse
import sys

import pandas as pd

from .figures import (
    FigureSpec,
    Marker,
    PlotError,
    beammap_spec,
    ber_sweep_spec,
    plot_heatmap,
    plot_lines,
    rate_sweep_spec,
)


def _parse_point(text: str) -> tuple[float, float]:
    x, y = text.split(",")
    return float(x), float(y)


def _markers(args) -> tuple:
    markers = [Marker(x, y, "user") for x, y in (args.users or [])]
    if args.eve is not None:
        markers.append(Marker(args.eve[0], args.eve[1], "eve"))
    return tuple(markers)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plotkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("lines", "heatmap"):
        p = sub.add_parser(name)
        p.add_argument("--csv", nargs="+", required=True, help="input CSV file(s)")
        p.add_argument("--out", required=True, help="output image path")
        p.add_argument("--x", default=None, help="x column override")
        p.add_argument("--y", default=None, help="y/value column override")
        p.add_argument("--series", default=None, help="series column override (lines)")
        p.add_argument("--log-y", action="store_true")
        p.add_argument("--title", default=None)
        p.add_argument("--users", nargs="*", type=_parse_point, default=None,
                       help="user marker coordinates as x,y")
        p.add_argument("--eve", type=_parse_point, default=None,
                       help="eavesdropper marker coordinates as x,y")
    return parser


def _autodetect_lines(csv_paths, markers) -> FigureSpec:
    head = pd.read_csv(csv_paths[0], comment="#", nrows=1)
    if "N0" in head.columns:
        return ber_sweep_spec(csv_paths, markers)
    if "P_max_dBm" in head.columns:
        return rate_sweep_spec(csv_paths, markers)
    raise PlotError(
        f"{csv_paths[0]}: cannot autodetect a line schema; pass --x/--y/--series"
    )


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    markers = _markers(args)
    try:
        if args.command == "lines":
            if args.x or args.y:
                if not (args.x and args.y):
                    raise PlotError("--x and --y must be given together")
                spec = FigureSpec(
                    csv_paths=tuple(args.csv),
                    kind="line",
                    x_column=args.x,
                    y_column=args.y,
                    series_column=args.series,
                    log_y=args.log_y,
                    title=args.title or "",
                    markers=markers,
                )
            else:
                spec = _autodetect_lines(tuple(args.csv), markers)
                if args.title:
                    spec = FigureSpec(**{**spec.__dict__, "title": args.title})
            path = plot_lines(spec, args.out)
        else:
            spec = beammap_spec(args.csv[0], markers)
            if args.title:
                spec = FigureSpec(**{**spec.__dict__, "title": args.title})
            path = plot_heatmap(spec, args.out, value_column=args.y or "power_dbm")
        print(f"wrote {path}")
    except (PlotError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
