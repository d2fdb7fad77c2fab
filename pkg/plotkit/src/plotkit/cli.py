"""plot: render one metric from several summary.csv files as one figure."""

import argparse
import sys

from .summaries import SummaryError, read_series
from .figure import render

EXIT_OK = 0
EXIT_INPUT = 2


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="plot",
        description="Draw a multi-series error-bar figure from summary.csv "
                    "files, one series per file.")
    ap.add_argument("summaries", nargs="+", metavar="SUMMARY_CSV")
    ap.add_argument("--metric", default="s_rlc_bps",
                    help="metric column to plot (default: %(default)s)")
    ap.add_argument("--labels",
                    help="comma-separated series labels, one per file "
                         "(default: variant directory names)")
    ap.add_argument("-o", "--out", default="figure.png",
                    help="output file; format from suffix (default: %(default)s)")
    ap.add_argument("--title", default="")
    ap.add_argument("--xlabel", default="")
    ap.add_argument("--ylabel", default="", help="override the unit-derived y label")
    ap.add_argument("--dpi", type=int, default=150)
    args = ap.parse_args(argv)

    labels = [None] * len(args.summaries)
    if args.labels is not None:
        labels = [s.strip() for s in args.labels.split(",")]
        if len(labels) != len(args.summaries):
            print(f"plot: {len(labels)} labels for {len(args.summaries)} files",
                  file=sys.stderr)
            return EXIT_INPUT

    try:
        series = [read_series(path, metric=args.metric, label=label)
                  for path, label in zip(args.summaries, labels)]
        out = render(series, args.out, title=args.title,
                     xlabel=args.xlabel, ylabel=args.ylabel, dpi=args.dpi)
    except SummaryError as exc:
        print(f"plot: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
