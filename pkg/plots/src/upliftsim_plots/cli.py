"""Command line figure renderer for harness summary CSVs."""

from __future__ import annotations

import argparse
import sys

from .render import PlotError, PlotSpec, plot_regret


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="upliftsim-plot",
        description="Render regret curves (mean with stderr bands, or 95th percentile) "
                    "from a summary.csv produced by the simulation harness")
    parser.add_argument("--summary", required=True, help="path to summary.csv")
    parser.add_argument("--metric", choices=("mean", "p95"), default="mean")
    parser.add_argument("--out", required=True, help="output image path (.png or .svg)")
    parser.add_argument("--policies", nargs="*", default=None,
                        help="optional policy-name filter")
    parser.add_argument("--log-x", action="store_true")
    parser.add_argument("--log-y", action="store_true")
    parser.add_argument("--title", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(summary_path=args.summary, metric=args.metric, out_path=args.out,
                    policies=args.policies, log_x=args.log_x, log_y=args.log_y,
                    title=args.title)
    try:
        out = plot_regret(spec)
    except (PlotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
