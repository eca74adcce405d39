#!/usr/bin/env python3
"""Time-to-error plot from one or more rmse CSV files.

Usage:
    python3 scripts/plot_time_to_error.py out/rmse-burnin-off.csv [more.csv ...] \
        [--output plot.png]

Each input is a CSV with columns level,rmse,median_abs_error,mean_time,total_time
as written by `btmc mlmcmc`.  The plot is log-log RMSE against mean estimator
wall time, one line per file.
"""

import argparse
import csv
import pathlib
import sys


def read_rows(path):
    with open(path, newline="") as handle:
        return [
            (int(r["level"]), float(r["rmse"]), float(r["mean_time"]))
            for r in csv.DictReader(handle)
        ]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv", nargs="+", help="rmse CSV files")
    parser.add_argument("--output", default="time_to_error.png")
    args = parser.parse_args()

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not available; printing the table instead", file=sys.stderr)
        for path in args.csv:
            print(path)
            for level, rmse, mean_time in read_rows(path):
                print(f"  L={level}  rmse={rmse:.6g}  mean_time={mean_time:.6g}s")
        return 0

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for path in args.csv:
        rows = read_rows(path)
        times = [t for _, _, t in rows]
        errors = [e for _, e, _ in rows]
        ax.loglog(times, errors, "o-", label=pathlib.Path(path).stem)
    if times:
        guide = [errors[0] * (times[0] / t) ** 0.5 for t in times]
        ax.loglog(times, guide, "k--", alpha=0.5, label="slope -1/2")
    ax.set_xlabel("mean estimator time [s]")
    ax.set_ylabel("empirical RMSE")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)
    print(f"wrote {args.output}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
