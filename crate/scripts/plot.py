#!/usr/bin/env python3
"""Plot the entropy curves in a pagecurve output directory.

usage: plot.py OUT_DIR [-o FILE] [--log-time]
"""
import argparse
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out_dir", type=pathlib.Path)
    ap.add_argument("-o", "--output", type=pathlib.Path)
    ap.add_argument("--log-time", action="store_true")
    args = ap.parse_args()

    files = sorted(args.out_dir.glob("*.csv"))
    if not files:
        raise SystemExit(f"no CSV files in {args.out_dir}")
    fig, ax = plt.subplots(figsize=(6, 4))
    for f in files:
        df = pd.read_csv(f)
        t = df["t"]
        if args.log_time:
            mask = t > 0
            ax.semilogx(t[mask], df["S"][mask], label=f.stem)
        else:
            ax.plot(t, df["S"], label=f.stem)
    ax.set_xlabel("t")
    ax.set_ylabel("S")
    ax.legend(fontsize="small")
    fig.tight_layout()
    out = args.output or args.out_dir / "entropy.png"
    fig.savefig(out, dpi=150)
    print(out)


if __name__ == "__main__":
    main()
