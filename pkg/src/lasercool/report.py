"""Figure rendering for run reports.

Each function writes a single PNG next to the delimited output of the
corresponding command.  Rendering is headless (Agg).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path, stamp):
    fig.savefig(
        path, dpi=150, bbox_inches="tight", metadata={"Software": stamp or "lasercool"}
    )
    plt.close(fig)


def plot_trajectory(times, spectra, path, tau_cross=None, stamp=None):
    """Eigenvalue evolution with the purity overlaid."""
    times = np.asarray(times)
    spectra = np.asarray(spectra)
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    for k in range(spectra.shape[1]):
        ax.plot(times, spectra[:, k], label=rf"$\lambda_{k + 1}$")
    ax.plot(times, spectra[:, 0], linestyle="--", color="black", linewidth=0.8, label="purity")
    if tau_cross is not None:
        ax.axvline(tau_cross, color="gray", linestyle=":", linewidth=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("eigenvalue")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="center right", fontsize=8)
    _save(fig, path, stamp)


def plot_dp_comparison(table, analytic, path, stamp=None):
    """DP values against the closed form on the full-horizon slice."""
    grid = table.grid
    dp_values = table.initial_values()
    deviation = np.abs(dp_values - analytic)
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6))
    sc0 = axes[0].scatter(grid[:, 0], grid[:, 1], c=dp_values, s=10, cmap="viridis")
    axes[0].set_title("DP value at full horizon")
    fig.colorbar(sc0, ax=axes[0])
    sc1 = axes[1].scatter(grid[:, 0], grid[:, 1], c=deviation, s=10, cmap="magma")
    axes[1].set_title("|DP - closed form|")
    fig.colorbar(sc1, ax=axes[1])
    for ax in axes:
        ax.set_xlabel(r"$\lambda_1$")
        ax.set_ylabel(r"$\lambda_2$")
    _save(fig, path, stamp)


def plot_certification(report_dict, path, stamp=None):
    """Worst margin of each certification check against its threshold."""
    checks = report_dict["checks"]
    names = list(checks)
    worsts = [checks[n]["worst"] for n in names]
    colors = ["tab:green" if checks[n]["pass"] else "tab:red" for n in names]
    fig, ax = plt.subplots(figsize=(7.0, 3.2))
    ax.barh(range(len(names)), worsts, color=colors)
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names, fontsize=8)
    ax.set_xlabel("worst margin")
    ax.axvline(0.0, color="black", linewidth=0.8)
    _save(fig, path, stamp)


def plot_equivalence(report_dict, path, stamp=None):
    """Summary bars for the equivalence and perturbation sweeps."""
    fig, axes = plt.subplots(1, 2, figsize=(8.0, 3.2))
    alg = report_dict["algebraic"]
    axes[0].bar(["worst deviation"], [alg["worst_deviation"]], color="tab:blue")
    axes[0].axhline(alg["threshold"], color="tab:red", linestyle="--", linewidth=0.8)
    axes[0].set_yscale("log")
    axes[0].set_title(f"reduced vs full-matrix ({alg['samples']} samples)")
    pert = report_dict["perturbation"]
    axes[1].bar(
        ["min ratio", "mean", "max ratio"],
        [pert["ratio_min"], pert["ratio_mean"], pert["ratio_max"]],
        color="tab:purple",
    )
    for bound in report_dict["perturbation_bounds"]:
        axes[1].axhline(bound, color="tab:red", linestyle="--", linewidth=0.8)
    axes[1].set_title("step-halving error ratios")
    _save(fig, path, stamp)
