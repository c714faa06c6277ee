"""Matplotlib figures written next to CLI outputs (non-interactive backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "figure.figsize": (5.5, 3.8),
    "figure.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "savefig.bbox": "tight",
}

# PNG metadata carries no timestamp; dropping the software tag keeps reruns byte-identical
_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def curves(path, x, series: dict, *, xlabel: str = "", ylabel: str = "", title: str = "",
           logy: bool = False, error: dict | None = None) -> Path:
    """Line plot of ``series`` against ``x``; optional second panel with absolute errors."""
    with plt.rc_context(RC):
        if error:
            fig, (ax, ax2) = plt.subplots(2, 1, sharex=True, height_ratios=(3, 1.4))
        else:
            fig, ax = plt.subplots()
        for label, y in series.items():
            style = "o" if np.size(x) <= 12 else "-"
            ax.plot(x, y, style, label=label, markersize=4)
        if logy:
            ax.set_yscale("log")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.legend(frameon=False)
        if error:
            for label, e in error.items():
                ax2.semilogy(x, np.maximum(np.abs(e), 1e-17), ".-", label=label, markersize=3)
            ax2.set_ylabel("abs. error")
            ax2.set_xlabel(xlabel)
        else:
            ax.set_xlabel(xlabel)
        return _save(fig, path)


def heatmap(path, x, y, z, *, xlabel: str = "", ylabel: str = "", title: str = "",
            cmap: str = "viridis") -> Path:
    """Colour map of ``z[i, j]`` over ``(y[i], x[j])``."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        mesh = ax.pcolormesh(x, y, z, shading="nearest", cmap=cmap)
        fig.colorbar(mesh, ax=ax)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.grid(False)
        return _save(fig, path)


def bars(path, labels, values, *, ylabel: str = "", title: str = "", logy: bool = True) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        vals = np.maximum(np.abs(np.asarray(values, dtype=float)), 1e-17)
        ax.bar(range(len(vals)), vals, color="0.4")
        ax.set_xticks(range(len(vals)), labels, rotation=30, ha="right")
        if logy:
            ax.set_yscale("log")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        return _save(fig, path)
