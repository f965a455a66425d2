"""Figure rendering for CLI reports. Always file-backed, never a display."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .cost import CostTable  # noqa: E402
from .geometry import Tier  # noqa: E402

__all__ = ["cost_figure", "field_figure", "savings_figure", "channel_error_figure"]

_TIER_ORDER = [t.value for t in (Tier.EASY, Tier.MEDIUM, Tier.HARD)]


def cost_figure(table: CostTable, path: Path | str, title: str = "Generation cost") -> None:
    """Grouped bars of mean wall seconds per tier, one group per axis."""
    axes = sorted({axis for axis, _ in table.cells})
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    width = 0.8 / max(len(axes), 1)
    x = np.arange(len(_TIER_ORDER))
    for k, axis in enumerate(axes):
        means = []
        stds = []
        for tier in _TIER_ORDER:
            cell = table.get(axis, tier)
            means.append(cell.mean_seconds if cell else 0.0)
            stds.append(cell.std if cell else 0.0)
        ax.bar(x + k * width, means, width, yerr=stds, capsize=3, label=axis)
    ax.set_xticks(x + width * (len(axes) - 1) / 2)
    ax.set_xticklabels(_TIER_ORDER)
    ax.set_ylabel("mean wall time per simulation [s]")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def field_figure(values: np.ndarray, path: Path | str, title: str = "",
                 extent: tuple[float, float] = (2.0, 2.0)) -> None:
    """Heat map of a cell-centered field, origin at the bottom-left."""
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    im = ax.imshow(
        values,
        origin="lower",
        extent=(0.0, extent[0], 0.0, extent[1]),
        cmap="RdBu_r",
        interpolation="nearest",
    )
    fig.colorbar(im, ax=ax)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def savings_figure(alphas: list[float], ratios: list[float], path: Path | str) -> None:
    """Savings ratio against the hard fraction of the training mix."""
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    ax.plot(alphas, ratios, "o-")
    ax.axhline(1.0, color="gray", lw=0.8, ls="--")
    ax.set_xlabel("hard-tier fraction of training set")
    ax.set_ylabel("generation-cost savings vs all-hard")
    ax.set_title("Compute savings by difficulty mixing")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def channel_error_figure(per_channel: dict, nmae_value: float,
                         path: Path | str) -> None:
    """Per-channel relative-L1 bars for an evaluation report."""
    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    names = list(per_channel)
    ax.bar(names, [per_channel[c] for c in names])
    ax.set_ylabel("relative L1 error")
    ax.set_title(f"nMAE {nmae_value:.4g}")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
