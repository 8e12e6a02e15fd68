"""Matplotlib figures written next to the CSV reports."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .hss import contraction_bound  # noqa: E402


def _finish(fig, ax, path):
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_residual_history(report, path):
    """Outer FGMRES relative residual against iteration."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    r = np.asarray(report.residuals)
    c = report.config
    ax.semilogy(np.arange(r.size), r / r[0], "o-",
                label=f"{c.formulation}/{c.source}, k={c.k:g}, theta={c.theta:g}")
    ax.axhline(c.rtol, color="k", ls=":", lw=1, label="rtol")
    ax.set_xlabel("outer iteration")
    ax.set_ylabel("relative residual")
    _finish(fig, ax, path)


def plot_table(table, path):
    """Outer iterations (count tables) or rates (rate tables) against k."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ks = [row[0] for row in table.rows]
    if table.name.endswith("rates"):
        first = 2 if table.name == "hss-rates" else 1
        for j, col in enumerate(table.columns[first:], start=first):
            if col.startswith("eta_s_l2"):
                continue
            ax.plot(ks, [float(row[j]) for row in table.rows], "o-", label=col)
        if table.name == "hss-rates":
            kk = np.linspace(min(ks), max(ks), 100)
            ax.plot(kk, contraction_bound(kk), "k--", lw=1, label="bound")
        ax.set_ylabel("rate")
    else:
        for j, col in enumerate(table.columns[1:], start=1):
            its = [int(str(row[j]).split()[0]) for row in table.rows]
            ax.plot(ks, its, "o-", label=col)
        ax.set_ylabel("outer iterations")
    ax.set_xscale("log", base=2)
    ax.set_xticks(ks)
    ax.set_xticklabels([str(k) for k in ks])
    ax.set_xlabel("k")
    ax.set_title(table.name)
    _finish(fig, ax, path)
