"""Optional figures for experiment rows.

Only imported when a figure is requested; uses the non-interactive Agg
backend and writes PNG files next to the delimited output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.family": "serif",
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.figsize": (4.5, 3.0),
    "savefig.dpi": 150,
}


def _by(rows, key):
    groups = {}
    for r in rows:
        groups.setdefault(r[key], []).append(r)
    return groups


def _tv_sweep(ax, rows):
    means = [r for r in rows if r["method"] == "summary-mean"]
    for R, grp in sorted(_by(means, "R_nats").items()):
        grp = sorted(grp, key=lambda r: r["n"])
        ax.semilogy([r["n"] for r in grp], [max(r["tv"], 1e-16) for r in grp], "o-", label=f"R = {R:.3g}")
    ax.set_xlabel("block length n")
    ax.set_ylabel("mean variational distance")


def _concentration(ax, rows):
    for R, grp in sorted(_by(rows, "R_nats").items()):
        grp = sorted(grp, key=lambda r: r["n"])
        n = [r["n"] for r in grp]
        ax.plot(n, [r["freq_tv_above"] for r in grp], "o-", label=f"empirical, R = {R:.3g}")
        ax.plot(n, [r["theorem2_rhs"] for r in grp], "k--", lw=0.8, label="bound")
        ax.plot(n, [r["tv_mean"] for r in grp], "s:", ms=3, label="mean TV")
    ax.set_xlabel("block length n")
    ax.set_ylabel("frequency / TV")


def _second_order(ax, rows):
    grp = sorted((r for r in rows if r.get("hypothesis_met")), key=lambda r: r["n"])
    ax.semilogx([r["n"] for r in grp], [r["mu"] for r in grp], "o-", label=r"$\mu(n)$")
    if grp:
        ax.axhline(grp[0]["xi"], color="k", lw=0.8, ls="--", label=r"$\xi$")
    ax.set_xlabel("block length n")
    ax.set_ylabel(r"$\mu$")


def _converse(ax, rows):
    groups = _by(rows, "codebook_seed")
    for i, (_, grp) in enumerate(sorted(groups.items())):
        grp = sorted(grp, key=lambda r: r["quantizer_levels"])
        k = [r["quantizer_levels"] for r in grp]
        ax.plot(k, [r["I_ell"] for r in grp], "o-", color="C0", alpha=0.6, label="I_ell" if i == 0 else None)
        ax.plot(k, [r["R_nats"] + r["slack"] for r in grp], "x:", color="C3", alpha=0.6, label="R + slack" if i == 0 else None)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("quantizer levels k")
    ax.set_ylabel("nats")


def _bounds(ax, rows):
    for R, grp in sorted(_by(rows, "R_nats").items()):
        grp = sorted(grp, key=lambda r: r["n"])
        n = np.array([r["n"] for r in grp])
        ax.semilogy(n, [r["chernoff_atypical"] for r in grp], "o-", label=f"atypical bound, R = {R:.3g}")
        ax.semilogy(n, [r["theorem2_threshold"] for r in grp], "s--", label="TV threshold")
    ax.set_xlabel("block length n")


_PANELS = {
    "tv-sweep": _tv_sweep,
    "concentration": _concentration,
    "second-order": _second_order,
    "converse-audit": _converse,
    "bounds-table": _bounds,
}


def plot_rows(rows: list, kind: str, path) -> Path:
    """Render the standard figure for ``kind`` and save it to ``path``."""
    path = Path(path)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        _PANELS[kind](ax, rows)
        if ax.get_legend_handles_labels()[0]:
            ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
