"""Command line entry: wormsim-figs --fig <id> --in <dir> --out <file.png>."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import FIGURE_IDS, FigureSpec, render
from .loader import DataError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wormsim-figs",
        description="Render standard figures from wormsim experiment CSV outputs",
    )
    parser.add_argument("--fig", required=True, choices=FIGURE_IDS, help="figure to render")
    parser.add_argument("--in", dest="input_dir", required=True, help="experiment output directory")
    parser.add_argument("--out", required=True, help="output image path (.png)")
    parser.add_argument("--log-y", action="store_true", help="logarithmic ordinate")
    parser.add_argument("--lam", type=float, default=None, help="fix the infection rate to plot")
    parser.add_argument("--n", type=int, default=None, help="fix the node count to plot")
    parser.add_argument(
        "--series",
        default=None,
        help="comma-separated series filter (RG, RGG, RGG+MAC)",
    )
    args = parser.parse_args(argv)

    series_filter = None
    if args.series:
        series_filter = tuple(tok.strip() for tok in args.series.split(",") if tok.strip())

    try:
        spec = FigureSpec(
            figure_id=args.fig,
            input_dir=Path(args.input_dir),
            output=Path(args.out),
            log_y=args.log_y,
            lambda_select=args.lam,
            node_select=args.n,
            series_filter=series_filter,
        )
        out = render(spec)
    except DataError as exc:
        print(f"wormsim-figs: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"wormsim-figs: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
