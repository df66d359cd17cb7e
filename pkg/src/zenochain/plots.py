"""Figure rendering for the report paths of the CLI.

Every plotting command writes PNG files next to the delimited tables so a
run's directory is self-describing.  The Agg backend keeps everything
headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150
MARKERS = ("o", "s", "^", "v", "D", "p", "*")


def _size_style(sizes):
    palette = plt.cm.viridis(np.linspace(0.0, 0.85, max(len(sizes), 2)))
    return {L: (palette[i], MARKERS[i % len(MARKERS)]) for i, L in enumerate(sorted(sizes))}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def sweep_curves_figure(rows, column, ylabel, path):
    """One observable column of the sweep table against g, one curve per L."""
    sizes = sorted({r["L"] for r in rows})
    style = _size_style(sizes)
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for L in sizes:
        pts = sorted((r for r in rows if r["L"] == L), key=lambda r: r["g"])
        g = [r["g"] for r in pts]
        y = [r[column] for r in pts]
        color, marker = style[L]
        ax.plot(g, y, marker=marker, ms=4, lw=1.0, color=color, label=f"L={L}")
    ax.set_xlabel(r"$g$")
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)


def timeseries_figure(series, t_lo, t_hi, path):
    """Mean S(t) and mixedness(t) panels for one L across measurement strengths.

    ``series``: list of dicts with keys L, g, times, S, mixedness.
    """
    fig, axes = plt.subplots(2, 1, figsize=(5.0, 5.6), sharex=True)
    cmap = plt.cm.plasma(np.linspace(0.0, 0.9, max(len(series), 2)))
    for color, cell in zip(cmap, series):
        axes[0].plot(cell["times"], cell["S"], lw=0.9, color=color, label=f"g={cell['g']:g}")
        axes[1].plot(cell["times"], cell["mixedness"], lw=0.9, color=color)
    for ax in axes:
        ax.axvline(t_lo, ls="--", lw=0.8, color="0.4")
        ax.axvline(t_hi, ls="--", lw=0.8, color="0.4")
    axes[0].set_ylabel(r"$S(t)$  [nats]")
    axes[1].set_ylabel(r"$1-P(t)$")
    axes[1].set_xlabel(r"$t$")
    axes[0].legend(frameon=False, fontsize=7, ncol=2)
    if series:
        fig.suptitle(f"ensemble-mean dynamics, L={series[0]['L']}", fontsize=10)
    return _save(fig, path)


def collapse_figure(key, ordinate, sizes, fit, path):
    """Scaled ordinate against the scaling key, colored by system size."""
    style = _size_style(sorted(set(sizes)))
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for L in sorted(set(sizes)):
        sel = sizes == L
        color, marker = style[L]
        ax.plot(key[sel], ordinate[sel], marker=marker, ms=4, lw=0.8, color=color, label=f"L={L}")
    label = ", ".join(f"{k}={v:.3g}" for k, v in fit.params.items())
    ax.set_title(f"{fit.ansatz}: {label}  (C={fit.cost:.3g})", fontsize=9)
    ax.set_xlabel(r"$L\,\mathrm{sgn}(g-g_c)\,|g-g_c|^{\nu}$")
    ax.set_ylabel("scaled ordinate")
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)


def peak_figure(curves, per_size, g_inf, slope, path):
    """Fluctuation curves with refined peak marks, plus the 1/L extrapolation."""
    sizes = sorted(curves)
    style = _size_style(sizes)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.4, 3.4))
    for L in sizes:
        g, y = curves[L]
        color, marker = style[L]
        ax1.plot(g, y, marker=marker, ms=4, lw=1.0, color=color, label=f"L={L}")
        if L in per_size:
            ax1.axvline(per_size[L], color=color, lw=0.7, ls=":")
    ax1.set_xlabel(r"$g$")
    ax1.set_ylabel(r"$\delta S$")
    ax1.legend(frameon=False, fontsize=8)

    fitted = sorted(per_size)
    inv = np.array([1.0 / L for L in fitted])
    ax2.plot(inv, [per_size[L] for L in fitted], "o", ms=5, color="C0")
    xs = np.linspace(0.0, inv.max() * 1.1, 50)
    ax2.plot(xs, g_inf + slope * xs, "--", color="0.3", label=f"$g_c(L) = {g_inf:.3g} + {slope:.3g}/L$")
    ax2.set_xlabel(r"$1/L$")
    ax2.set_ylabel(r"$g_c(L)$")
    ax2.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def critical_fit_figure(sizes, values, fit, path):
    """Critical entropy against L with the log and power-law fits overlaid."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.plot(sizes, values, "o", ms=5, color="C0", label="data")
    xs = np.linspace(min(sizes) * 0.95, max(sizes) * 1.05, 100)
    ax.plot(xs, fit.log_slope * np.log(xs) + fit.log_offset, "--", color="0.3",
            label=f"${fit.log_slope:.3g}\\,\\ln L + {fit.log_offset:.3g}$")
    ax.plot(xs, fit.power_amp * xs ** fit.power_exp, "-.", color="C3",
            label=f"${fit.power_amp:.3g}\\,L^{{{fit.power_exp:.3g}}}$")
    ax.set_xscale("log")
    ax.set_xlabel(r"$L$")
    ax.set_ylabel("critical-point entropy  [nats]")
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)


def phase_diagram_figure(V, g_c, fit, path):
    """Critical line in the (V, g) plane with the fitted exponential curve."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.plot(V, g_c, "o", ms=5, color="C0", label="transition estimates")
    xs = np.linspace(min(V) * 0.5, max(V) * 1.1, 200)
    ax.plot(xs, fit.amplitude * np.exp(-fit.rate * xs ** fit.exponent), "--", color="0.3",
            label=f"${fit.amplitude:.3g}\\,e^{{-{fit.rate:.3g} V^{{{fit.exponent:.3g}}}}}$")
    ax.fill_between(xs, 0, fit.amplitude * np.exp(-fit.rate * xs ** fit.exponent), alpha=0.08, color="C0")
    ax.set_xlabel(r"$V$")
    ax.set_ylabel(r"$g_c$")
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)
