"""Deterministic SVG figures (fixed hash salt, no date stamp)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "satseek"


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_channels(times, values, path, ylabel: str, reference=None, limits=None) -> None:
    """One line per column of ``values``; optional horizontal reference lines and +-limits."""
    values = np.asarray(values)
    if values.ndim == 1:
        values = values[:, None]
    fig, ax = plt.subplots(figsize=(6, 3.2))
    for i in range(values.shape[1]):
        label = ylabel if values.shape[1] == 1 else f"{ylabel}_{i + 1}"
        ax.plot(times, values[:, i], lw=0.8, label=label)
    for r in np.atleast_1d(reference) if reference is not None else ():
        ax.axhline(r, color="k", ls="--", lw=0.6)
    for lim in np.atleast_1d(limits) if limits is not None else ():
        ax.axhline(lim, color="r", ls=":", lw=0.6)
        ax.axhline(-lim, color="r", ls=":", lw=0.6)
    ax.set_xlabel("t [s]")
    ax.set_ylabel(ylabel)
    ax.legend(loc="best", fontsize="small")
    _save(fig, path)


def plot_trace(trace, plant, out_dir) -> list:
    """Panels for sat(u), theta and y; returns the written paths."""
    paths = [out_dir / "sat_u.svg", out_dir / "theta.svg", out_dir / "y.svg"]
    plot_channels(trace.times, trace.u_sat, paths[0], "sat(u)", limits=plant.sat_limits)
    plot_channels(trace.times, trace.theta, paths[1], "theta", reference=plant.optimizer)
    plot_channels(trace.times, trace.y, paths[2], "y", reference=plant.optimum_value)
    return paths


def plot_sweep(report, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    w, r = report.omegas, report.residuals
    ax.loglog(w, r, "o", label="residual")
    if r.size >= 2:
        coef = np.polyfit(np.log(w), np.log(r), 1)
        ax.loglog(w, np.exp(np.polyval(coef, np.log(w))), "-", lw=0.8, label=f"slope {coef[0]:.2f}")
    ax.set_xlabel("base frequency [rad/s]")
    ax.set_ylabel("sup deviation")
    ax.legend(loc="best", fontsize="small")
    _save(fig, path)
