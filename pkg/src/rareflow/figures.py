"""Figure rendering for experiment reports.

Every experiment that writes a delimited report also renders one PNG next to
it.  Figures carry fixed metadata so repeated runs produce byte-identical
files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

_PNG_METADATA = {"Software": "rareflow"}
_DPI = 130


def save_png(fig, path: Path) -> None:
    tmp = path.with_suffix(".tmp.png")
    fig.savefig(tmp, dpi=_DPI, metadata=_PNG_METADATA)
    plt.close(fig)
    tmp.replace(path)


def path_figure(path_solution, title: str):
    fig, axes = plt.subplots(2, 1, figsize=(7.0, 6.0), sharex=True)
    t = path_solution.time_grid
    axes[0].plot(t, path_solution.l2_norms, color="C0", label="weighted L2 norm")
    axes[0].plot(t, path_solution.fstar_norms, color="C1", label="dual norm")
    axes[0].set_ylabel("state norms")
    axes[0].legend()
    axes[0].grid(alpha=0.3)
    axes[1].plot(t, path_solution.psi_integral_f12, color="C2")
    axes[1].set_ylabel("form norm of cumulative drift")
    axes[1].set_xlabel("t")
    axes[1].grid(alpha=0.3)
    fig.suptitle(title)
    fig.tight_layout()
    return fig


def rate_figure(report, xlabel: str, title: str):
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.loglog(report.scales, report.discrepancies, "o-", color="C0", label="measured")
    if np.isfinite(report.slope):
        fit = np.exp(report.intercept) * report.scales**report.slope
        ax.loglog(
            report.scales, fit, "--", color="C3",
            label=f"fit slope {report.slope:.3f}",
        )
    ax.set_xlabel(xlabel)
    ax.set_ylabel("sup-in-time squared dual gap")
    ax.grid(alpha=0.3, which="both")
    ax.legend()
    ax.set_title(title)
    fig.tight_layout()
    return fig


def mc_figure(report, title: str):
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    eps = np.asarray(report.eps_list)
    means = report.means()
    errs = np.asarray([r["stderr"] for r in report.rows])
    ax.errorbar(eps, means, yerr=errs, fmt="o", color="C0", capsize=3, label="estimate")
    fit = np.exp(
        np.log(means[0]) + report.slope * (np.log(eps) - np.log(eps[0]))
    )
    ax.loglog(eps, fit, "--", color="C3", label=f"fit slope {report.slope:.3f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("noise scale")
    ax.set_ylabel("mean sup-in-time squared dual gap")
    ax.grid(alpha=0.3, which="both")
    ax.legend()
    ax.set_title(title)
    fig.tight_layout()
    return fig


def decay_figure(report, title: str):
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    ax.loglog(report.n_list, report.gaps, "o-", color="C0")
    ax.set_xlabel("oscillation count n")
    ax.set_ylabel("sup-in-time dual gap")
    ax.grid(alpha=0.3, which="both")
    ax.set_title(title)
    fig.tight_layout()
    return fig


def validate_figure(margins: dict, title: str):
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    names = list(margins)
    values = [margins[k] for k in names]
    ax.barh(names, values, color="C0")
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_xlabel("worst margin (negative = violation)")
    ax.set_title(title)
    fig.tight_layout()
    return fig


def control_figure(coefficients: np.ndarray, title: str):
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    cells, modes = coefficients.shape
    for j in range(modes):
        ax.step(np.arange(cells), coefficients[:, j], where="mid", label=f"mode {j}")
    ax.set_xlabel("time cell")
    ax.set_ylabel("control coefficient")
    ax.grid(alpha=0.3)
    if modes <= 8:
        ax.legend()
    ax.set_title(title)
    fig.tight_layout()
    return fig
