#!/usr/bin/env python3
"""Render harness output.

    plot.py cells results/cells.csv out.png     mean ratio per grid value
    plot.py curve curve.csv out.png             ratio per split (from `solve --curve`)
"""
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def cells(src, dst):
    df = pd.read_csv(src)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(df["value"], df["meanRatio"], yerr=df["stdRatio"], marker="o", capsize=3)
    ax.set_xlabel(df["parameter"].iloc[0])
    ax.set_ylabel("risk after / risk before")
    ax.set_ylim(bottom=0)
    fig.tight_layout()
    fig.savefig(dst, dpi=150)


def curve(src, dst):
    df = pd.read_csv(src)
    best = df["ratio"].idxmin()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(df["split"], df["ratio"])
    ax.plot(df["split"][best], df["ratio"][best], "o", color="C3")
    ax.set_xlabel("% of budget for isolation")
    ax.set_ylabel("risk after / risk before")
    fig.tight_layout()
    fig.savefig(dst, dpi=150)


if __name__ == "__main__":
    if len(sys.argv) != 4 or sys.argv[1] not in ("cells", "curve"):
        sys.exit(__doc__)
    {"cells": cells, "curve": curve}[sys.argv[1]](sys.argv[2], sys.argv[3])
