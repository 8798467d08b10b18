#!/usr/bin/env python3
"""Plot isacsim output files: sweep CSVs, cost-map rasters, coverage maps.

Examples:
    plot_results.py sweep out/sweep_rho.csv --metric sum_se --metric peb_coherent
    plot_results.py costmap out/costmap_0.txt --log
    plot_results.py coverage out/coverage_0.txt --threshold 0.00857
"""

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd


def save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    print(path)


def cmd_sweep(args):
    frames = [pd.read_csv(p) for p in args.csv]
    df = pd.concat(frames, ignore_index=True)
    metrics = args.metric or sorted(df["metric"].unique())
    axis = df["axis"].iloc[0]
    for metric in metrics:
        sel = df[df["metric"] == metric].sort_values("axis_value")
        if sel.empty:
            print(f"no rows for metric {metric!r}", file=sys.stderr)
            continue
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.fill_between(sel["axis_value"], sel["q10"], sel["q90"], alpha=0.25,
                        label="10-90%")
        ax.plot(sel["axis_value"], sel["median"], marker="o", label="median")
        ax.plot(sel["axis_value"], sel["mean"], linestyle="--", label="mean")
        ax.set_xlabel(axis)
        ax.set_ylabel(metric)
        if args.logy:
            ax.set_yscale("log")
        ax.legend()
        ax.grid(True, alpha=0.3)
        save(fig, f"{args.prefix}sweep_{axis}_{metric}.png")


def cmd_costmap(args):
    with open(args.raster) as f:
        f.readline()  # comment header
        x0, y0, spacing, nx, ny, energy = f.readline().split()
        nx, ny = int(nx), int(ny)
        values = np.loadtxt(f)
    values = values.reshape(ny, nx)
    x0, y0, spacing = float(x0), float(y0), float(spacing)
    if args.log:
        values = np.log10(np.maximum(values, np.finfo(float).tiny))
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(values, origin="lower", cmap="viridis",
                   extent=[x0, x0 + (nx - 1) * spacing,
                           y0, y0 + (ny - 1) * spacing])
    fig.colorbar(im, ax=ax,
                 label="log10 cost" if args.log else "cost")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    save(fig, f"{args.prefix}costmap.png")


def cmd_coverage(args):
    data = np.loadtxt(args.points)
    x, y, peb = data[:, 0], data[:, 1], data[:, 2]
    fig, ax = plt.subplots(figsize=(5, 4.2))
    sc = ax.scatter(x, y, c=np.log10(peb), s=14, cmap="plasma")
    fig.colorbar(sc, ax=ax, label="log10 PEB [m]")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    if args.threshold is not None:
        frac = float(np.mean(peb <= args.threshold))
        ax.set_title(f"fraction below {args.threshold:g} m: {frac:.3f}")
    save(fig, f"{args.prefix}coverage.png")


def main():
    top = argparse.ArgumentParser(description=__doc__)
    top.add_argument("--prefix", default="", help="output filename prefix")
    sub = top.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("sweep", help="plot sweep CSV metrics vs axis value")
    p.add_argument("csv", nargs="+")
    p.add_argument("--metric", action="append",
                   help="metric name (repeatable; default: all)")
    p.add_argument("--logy", action="store_true")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("costmap", help="render a cost-map raster")
    p.add_argument("raster")
    p.add_argument("--log", action="store_true")
    p.set_defaults(fn=cmd_costmap)

    p = sub.add_parser("coverage", help="scatter a coverage point list")
    p.add_argument("points")
    p.add_argument("--threshold", type=float,
                   help="PEB threshold in meters for the title fraction")
    p.set_defaults(fn=cmd_coverage)

    args = top.parse_args()
    args.fn(args)


if __name__ == "__main__":
    main()
