"""Report figures, rendered headless to PNG.

PNG metadata is stripped of the software tag so that identical inputs give
byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .adaptation import ZoneThresholds  # noqa: E402

_DPI = 100


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI, format="png", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_diagram(points, thresholds: ZoneThresholds, path):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.add_patch(plt.Rectangle((thresholds.x_threshold, 0.0), 1 - thresholds.x_threshold,
                               thresholds.y_threshold, color="#b7e4b0", zorder=0))
    for p in points:
        ax.scatter(p.x, p.y, color="#1a7f37" if p.in_green_zone else "#cf222e", zorder=2)
        ax.annotate(p.region_id, (p.x, p.y), textcoords="offset points", xytext=(5, 5), fontsize=8)
    ax.set(xlim=(0, 1), ylim=(0, 1), xlabel="normalized development",
           ylabel="ecological stress")
    return _save(fig, path)


def plot_energy(eigenvalues, path, label="velocity"):
    lam = np.asarray(eigenvalues, dtype=float)
    total = lam.sum()
    frac = np.cumsum(lam) / total if total > 0 else np.ones_like(lam)
    k = np.arange(1, len(lam) + 1)
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.5))
    pos = lam > 0
    if pos.any():
        a1.semilogy(k[pos], lam[pos], "o-", ms=3)
    a1.set(xlabel="mode", ylabel="eigenvalue", title=f"{label} spectrum")
    a2.plot(k, frac, "o-", ms=3)
    a2.set(xlabel="retained modes", ylabel="energy fraction", ylim=(0, 1.02))
    return _save(fig, path)


def plot_forecast(times, values, future_times, future_values, path, label=""):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(times, values, "o-", ms=3, label="observed")
    ax.plot(future_times, future_values, "s--", ms=3, label="forecast")
    ax.set(xlabel="time", ylabel=label)
    ax.legend()
    return _save(fig, path)


def plot_loss(history, path, label="training loss"):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    h = np.asarray(history, dtype=float)
    if h.size and (h > 0).all():
        ax.semilogy(np.arange(1, h.size + 1), h)
    else:
        ax.plot(np.arange(1, h.size + 1), h)
    ax.set(xlabel="epoch", ylabel="MSE", title=label)
    return _save(fig, path)


def plot_recon_errors(errors, path, floor=None, label="reconstruction"):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    e = np.asarray(errors, dtype=float)
    ax.plot(np.arange(len(e)), e, "o-", ms=3, label="relative L2 error")
    if floor is not None:
        ax.axhline(floor, color="k", ls="--", lw=1, label="truncation floor")
    ax.set(xlabel="test snapshot", ylabel="relative error", title=label)
    ax.legend()
    return _save(fig, path)
