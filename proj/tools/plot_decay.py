#!/usr/bin/env python3
"""Plot log escape probability against L from a decay run directory."""
import argparse
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("run_dir", type=Path, help="directory written by `qpfk decay`")
    ap.add_argument("-o", "--output", type=Path, help="image path (default RUN_DIR/decay.png)")
    args = ap.parse_args()

    df = pd.read_csv(args.run_dir / "decay.csv", comment="#")
    summary = json.loads((args.run_dir / "decay.json").read_text())
    fit = summary["fit"]

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(df["L"], df["log_estimate"], yerr=2 * df["log_std_error"], fmt="o", capsize=3, label="estimate")
    if fit.get("fitted"):
        xs = df["L"].to_numpy(dtype=float)
        ax.plot(xs, fit["intercept"] + fit["slope"] * xs, "--",
                label=f"slope {fit['slope']:.3f} ± {fit['slope_se']:.3f}")
    ax.set_xlabel("L")
    ax.set_ylabel("log escape probability")
    ax.legend()
    fig.tight_layout()
    out = args.output or args.run_dir / "decay.png"
    fig.savefig(out, dpi=150)
    print(out)


if __name__ == "__main__":
    main()
