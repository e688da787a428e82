"""Figures for the CLI report path (written only when ``--figures`` is given).

Plots are drawn from the same arrays that go into the CSV files, so a figure
never shows anything the data files do not contain.
"""

from __future__ import annotations

from math import sqrt
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GOLDEN = (sqrt(5.0) - 1.0) / 2.0

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.linewidth": 0.8,
    "lines.linewidth": 1.2,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    "svg.hashsalt": "kerrbin",
}


def figsize(width=3.4, ratio=GOLDEN, rows=1):
    return (width, width * ratio * rows)


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # no Software/date chunks, so reruns give identical bytes
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_rabi(traces, path):
    """traces: list of (label, t, pop, effective-or-None)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(4.2))
        for label, t, pop, eff in traces:
            (line,) = ax.plot(t, pop, label=label)
            if eff is not None:
                ax.plot(t, eff, ls=":", lw=0.8, color=line.get_color())
        ax.set_xlabel("t")
        ax.set_ylabel(r"$P(|1_L\rangle)$")
        ax.set_ylim(-0.02, 1.02)
        ax.legend(frameon=False, loc="lower right")
        return _save(fig, path)


def plot_calibration(sweeps, path):
    """sweeps: list of (parameter name, values, fidelities)."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(sweeps), figsize=figsize(7.0, 0.3))
        for ax, (name, x, f) in zip(np.atleast_1d(axes), sweeps):
            x, f = np.asarray(x), np.asarray(f)
            ax.plot(x, f, marker=".", ms=3)
            k = int(np.nanargmax(f))
            ax.axvline(x[k], color="0.6", lw=0.6, ls="--")
            ax.set_xlabel(name)
            ax.set_title(f"max {f[k]:.5f} at {x[k]:.4g}", fontsize=7)
        np.atleast_1d(axes)[0].set_ylabel("fidelity")
        fig.tight_layout()
        return _save(fig, path)


def plot_qec(t, f_ini, f_fin, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(4.2))
        ax.plot(t, f_ini, marker="o", ms=3, label="without QEC")
        ax.plot(t, f_fin, marker="s", ms=3, label="with QEC")
        ax.set_xlabel(r"$t_{\rm error}$")
        ax.set_ylabel("fidelity")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_zrot(phases, fid_phased, fid_unphased, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize())
        ax.plot(phases, fid_phased, marker="o", ms=3, label="phased target")
        ax.plot(phases, fid_unphased, marker="x", ms=3, label="input state")
        ax.set_xlabel(r"$\varphi$")
        ax.set_ylabel("fidelity")
        ax.set_ylim(-0.05, 1.05)
        ax.legend(frameon=False, loc="lower left")
        return _save(fig, path)
