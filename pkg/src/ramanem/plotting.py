"""Optional SVG line charts (needs matplotlib)."""

from __future__ import annotations

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_profiles(path, profiles: dict, truth=None):
    fig, ax = plt.subplots(figsize=(5, 6))
    if truth is not None:
        ax.plot(truth.alpha, truth.grid.z, color="black", lw=1.5, label="truth")
    for name, prof in profiles.items():
        ax.plot(prof.alpha, prof.grid.z, lw=1, label=name)
    ax.set_xlabel("extinction [1/m]")
    ax.set_ylabel("altitude [m]")
    ax.legend()
    fig.savefig(path)
    plt.close(fig)


def plot_band(path, mean, truth=None):
    fig, ax = plt.subplots(figsize=(5, 6))
    z = mean.grid.z
    if mean.band_low is not None:
        ax.fill_betweenx(z, mean.band_low, mean.band_high, color="tab:blue", alpha=0.3, label="band")
    ax.plot(mean.alpha, z, color="tab:blue", lw=1, label="mean")
    if truth is not None:
        ax.plot(truth.alpha, truth.grid.z, color="black", lw=1, label="truth")
    ax.set_xlabel("extinction [1/m]")
    ax.set_ylabel("altitude [m]")
    ax.legend()
    fig.savefig(path)
    plt.close(fig)
