#!/usr/bin/env python
"""
Usage:
    plot_convergence.py RESULTS_CSV [--save PATH]

Plot D_N, D_M and D_mix against eps on log-log axes, with the fitted slopes
and a reference line of slope 1/alpha. Reads the results.csv of a
`convergence` run, or of a `trajectory` run (then the scaled N/R and M/R of
every replicate are drawn against n).
"""

import os
from argparse import ArgumentParser

import numpy as np
import pandas as pd
import matplotlib.pyplot as plt


def get_args():
    parser = ArgumentParser(description='plot convergence results')
    parser.add_argument(
        "RESULTS_CSV",
        type=str,
        help="results.csv of a convergence or trajectory run",
    )
    parser.add_argument(
        "--save",
        "-s",
        default=None,
        type=str,
        help="write the figure here instead of showing it",
    )
    return parser.parse_args()


def plot_discrepancies(table, ax):
    eps = table["eps"].to_numpy()
    for column, marker in (("D_N", "o"), ("D_M", "s"), ("D_mix", "^")):
        slope = table["slope_%s" % column[2:]].iloc[0]
        ax.errorbar(eps, table[column], yerr=2 * table[column + "_stderr"], marker=marker, capsize=3,
                    label="%s (slope %.3f)" % (column, slope))
    expected = table["expected_slope"].iloc[0]
    anchor = table["D_mix"].iloc[-1]
    ax.plot(eps, anchor * (eps / eps[-1]) ** expected, "k--", label="slope 1/alpha = %.3f" % expected)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("$\\varepsilon$")
    ax.set_ylabel("weighted mean square error")


def plot_trajectories(table, ax):
    for _, rows in table.groupby("replicate"):
        ax.plot(rows["n_index"], rows["count_ratio"], color="C0", alpha=0.5)
        ax.plot(rows["n_index"], rows["mass_ratio"], color="C1", alpha=0.5)
    ax.axhline(1.0, color="k", linestyle="--")
    ax.plot([], [], color="C0", label="scaled N / R")
    ax.plot([], [], color="C1", label="scaled M / R")
    ax.set_xlabel("$n$  ($\\varepsilon_n = n^{-2\\alpha}$)")
    ax.set_ylabel("ratio")


if __name__ == '__main__':
    args = get_args()
    table = pd.read_csv(os.path.abspath(args.RESULTS_CSV))

    fig, ax = plt.subplots(figsize=(6, 4.5))
    if "D_N" in table:
        plot_discrepancies(table, ax)
    elif "count_ratio" in table:
        plot_trajectories(table, ax)
    else:
        raise SystemExit("%s is neither a convergence nor a trajectory table" % args.RESULTS_CSV)
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    if args.save:
        fig.savefig(args.save, dpi=150)
    else:
        plt.show()
