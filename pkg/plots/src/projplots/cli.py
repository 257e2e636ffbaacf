"""Script frontend: flags mirror FigureSpec."""

from __future__ import annotations

import argparse
import sys

from .figures import METRICS, FigureSpec, SchemaError, plot_metric


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="projcore-plot",
        description="Render benchmark result CSVs as mean/std-band figures",
    )
    p.add_argument("--input", required=True, help="results CSV (frozen schema)")
    p.add_argument("--metric", choices=sorted(METRICS), required=True)
    p.add_argument("--output", required=True, help="output image (.png or .svg)")
    p.add_argument("--title", default="")
    p.add_argument("--log-y", action="store_true",
                   help="logarithmic y axis (multi-order-of-magnitude gaps)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(input_csv=args.input, metric=args.metric,
                      output=args.output, title=args.title, log_y=args.log_y)
    try:
        out = plot_metric(spec)
    except (SchemaError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
