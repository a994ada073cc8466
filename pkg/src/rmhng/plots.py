"""SVG figures rebuilt from the CSV outputs alone, so plotting is never load-bearing."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "rmhng"
    return plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def _curves(rows, column):
    """Per method: mean of ``column`` over trials and agents at each iteration."""
    acc = defaultdict(lambda: defaultdict(list))
    for r in rows:
        if r[column] != "":
            acc[r["method"]][int(r["iteration"])].append(float(r[column]))
    return {m: (np.array(sorted(v)), np.array([np.mean(v[i]) for i in sorted(v)])) for m, v in acc.items()}


def plot_curves(per_iteration_csv, out_dir) -> dict:
    """ARI and kappa against iteration, one line per method."""
    from .harness import read_csv

    plt = _pyplot()
    rows = read_csv(per_iteration_csv)
    out = {}
    for column, label in (("ari", "ARI"), ("kappa", "kappa")):
        curves = _curves(rows, column)
        if not curves:
            continue
        fig, ax = plt.subplots(figsize=(6, 4))
        for method, (x, y) in curves.items():
            ax.plot(x, y, label=method)
        ax.set_xlabel("iteration")
        ax.set_ylabel(label)
        ax.legend(fontsize="small")
        fig.tight_layout()
        path = Path(out_dir) / f"{column}_curves.svg"
        _save(fig, path)
        plt.close(fig)
        out[f"{column}_plot"] = path
    return out


def plot_timing(timing_csv, path) -> Path:
    """Seconds per iteration against T on log-log axes, one line per M."""
    from .harness import read_csv

    plt = _pyplot()
    by_m = defaultdict(list)
    for r in read_csv(timing_csv):
        by_m[int(r["M"])].append((int(r["T"]), float(r["seconds_per_iteration"])))
    fig, ax = plt.subplots(figsize=(5, 4))
    for m, pts in sorted(by_m.items()):
        pts.sort()
        ax.loglog([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"M={m}")
    ax.set_xlabel("internal iterations T")
    ax.set_ylabel("seconds per iteration")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
    return Path(path)
