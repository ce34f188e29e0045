"""Plot the summary CSVs written by `bilid exp figure1` and `bilid exp double-descent`.

Input columns: rho,L,T,trials,mean_err,std_err (double descent adds
mean_residual_norm,interpolation_threshold).

Panels:
  error vs T     one line per (rho, L), mean_err with a +/- std_err band, log y axis
  error vs L     fix T (default 1600), one line per rho
  double descent mean_err vs T with a vertical line where interpolation_threshold is true

Usage: python scripts/plot_figure1.py results_summary.csv [--fixed-T 1600] [--out fig.png]
"""

import argparse

import matplotlib.pyplot as plt
import pandas as pd


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("summary")
    ap.add_argument("--fixed-T", type=int, default=1600)
    ap.add_argument("--out", default="figure1.png")
    args = ap.parse_args()

    df = pd.read_csv(args.summary)
    fig, (ax_t, ax_l) = plt.subplots(1, 2, figsize=(10, 4))
    for (rho, l), cell in df.groupby(["rho", "L"]):
        ax_t.plot(cell["T"], cell["mean_err"], label=f"rho={rho}, L={l}")
        ax_t.fill_between(cell["T"], cell["mean_err"] - cell["std_err"], cell["mean_err"] + cell["std_err"], alpha=0.2)
        if "interpolation_threshold" in cell:
            for t in cell.loc[cell["interpolation_threshold"], "T"]:
                ax_t.axvline(t, linestyle="--", color="grey")
    ax_t.set(xlabel="T", ylabel="||G - G_hat||_F^2", yscale="log")
    ax_t.legend()

    fixed = df[df["T"] == args.fixed_T]
    for rho, cell in fixed.groupby("rho"):
        ax_l.errorbar(cell["L"], cell["mean_err"], yerr=cell["std_err"], marker="o", label=f"rho={rho}")
    ax_l.set(xlabel="L", ylabel=f"error at T={args.fixed_T}", yscale="log")
    ax_l.legend()
    fig.tight_layout()
    fig.savefig(args.out)


if __name__ == "__main__":
    main()
