"""Render the sweep CSVs written by `cfaug corr-sweep` / `cfaug n-sweep`.

    python scripts/plot_sweeps.py out/corr_sweep.v1.csv corr.png --x mi
    python scripts/plot_sweeps.py out/n_sweep.v1.csv n.png --x n
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def label(row):
    if row["method"] == "aug_corrupt":
        return f"aug(λ={row['lambda']:g})"
    return row["method"]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv")
    ap.add_argument("out")
    ap.add_argument("--x", choices=["mi", "n"], default="mi")
    args = ap.parse_args()

    df = pd.read_csv(args.csv)
    df["label"] = df.apply(label, axis=1)
    df["mi"] = (df["mi_lo"] + df["mi_hi"]) / 2
    g = df.groupby(["label", args.x])["ood_acc"].agg(["mean", "sem"]).reset_index()

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, part in g.groupby("label"):
        ax.errorbar(part[args.x], part["mean"], yerr=part["sem"], label=name, marker="o", capsize=2)
    if "bayes_acc" in df:
        ax.axhline(df["bayes_acc"].mean(), color="gray", ls="--", lw=1, label="x* Bayes")
    if args.x == "n":
        ax.set_xscale("log")
    ax.set_xlabel("I(Y;C)" if args.x == "mi" else "training examples")
    ax.set_ylabel("OOD accuracy")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
