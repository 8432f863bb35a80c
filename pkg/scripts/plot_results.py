#!/usr/bin/env python3
"""Plot the CSV outputs of the sipsmi CLI.

Usage:
    python scripts/plot_results.py l-sweep sweep.csv [-o sweep.png]
    python scripts/plot_results.py pareto pareto.csv [-o pareto.png]

The experiment drivers emit data only; this companion script turns the
CSV files into figures.
"""

import argparse
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def plot_l_sweep(path, out):
    rows = read_rows(path)
    slots = [int(r["L"]) for r in rows]
    theo = [float(r["smi_theoretical"]) for r in rows]
    emp = [float(r["smi_empirical_mean"]) for r in rows]
    err = [2 * float(r["smi_empirical_stderr"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(slots, emp, yerr=err, fmt="o", capsize=3, label="Empirical")
    ax.plot(slots, theo, "s--", label="Theoretical")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("time slots L")
    ax.set_ylabel("SMI")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=200)
    print(f"wrote {out}")


def plot_pareto(path, out):
    rows = read_rows(path)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    styles = {
        "proposed": dict(marker="o", ls="-", label="Proposed"),
        "timeshare": dict(marker=".", ls="--", label="Time sharing"),
        "sensing": dict(marker="*", ls="", ms=12, label="Sensing-oriented"),
        "comm": dict(marker="D", ls="", label="Comm-oriented (waterfilling)"),
    }
    for method, style in styles.items():
        pts = sorted(
            ((float(r["rate"]), float(r["smi"])) for r in rows if r["method"] == method)
        )
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], **style)
    ax.set_xlabel("communication rate")
    ax.set_ylabel("SMI")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=200)
    print(f"wrote {out}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("kind", choices=["l-sweep", "pareto"])
    parser.add_argument("csv_path")
    parser.add_argument("-o", "--out", default=None)
    args = parser.parse_args()
    out = args.out or args.csv_path.rsplit(".", 1)[0] + ".png"
    if args.kind == "l-sweep":
        plot_l_sweep(args.csv_path, out)
    else:
        plot_pareto(args.csv_path, out)


if __name__ == "__main__":
    main()
