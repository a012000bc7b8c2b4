"""Comparison charts for the marginal analysis, rendered off-screen."""

import logging
import math
from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib as mpl
mpl.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from qcbm_loader.models.schemas import MarginalSet

logger = logging.getLogger(__name__)

GOLDEN_RATIO = (math.sqrt(5) - 1.0) / 2.0

mpl.rcParams.update({
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "savefig.bbox": "tight",
})


def _figure(width: float = 6.0, ncols: int = 1):
    return plt.subplots(ncols=ncols, figsize=(width * ncols, width * GOLDEN_RATIO))


def _save(fig, path: Union[str, Path], dpi: int = 150) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    logger.debug("wrote chart %s", path)
    return path


def plot_marginals(
    panels: Sequence[MarginalSet],
    labels: Sequence[str],
    path: Union[str, Path],
    reference: Optional[MarginalSet] = None,
) -> Path:
    """
    Grouped bars of P_i per panel next to the ideal P*_i, one axis per
    panel. A depolarized reference is drawn as an extra panel when given.
    """
    panels = list(panels) + ([reference] if reference is not None else [])
    labels = list(labels) + (["depolarized"] if reference is not None else [])
    fig, axes = _figure(ncols=len(panels))
    axes = np.atleast_1d(axes)
    for ax, panel, label in zip(axes, panels, labels):
        x = np.arange(len(panel.subset))
        ax.bar(x - 0.2, panel.estimates, width=0.4, label="P")
        if panel.ideal is not None:
            ax.bar(x + 0.2, panel.ideal, width=0.4, label="P*")
        ax.axhline(0.5, color="gray", linestyle=":", linewidth=1)
        ax.set_xticks(x)
        ax.set_xticklabels([f"q{q}" for q in panel.subset])
        ax.set_ylim(0.0, 1.0)
        ax.set_title(label)
    axes[0].set_ylabel("probability of 0")
    axes[0].legend()
    return _save(fig, path)


def plot_l1_vs_gates(
    gate_counts: Sequence[int],
    l1_values: Sequence[float],
    path: Union[str, Path],
    baseline: Optional[float] = None,
    percentile: Optional[float] = None,
) -> Path:
    """L1 of the measured marginals against two-qubit gate count, with mixed-state reference lines."""
    order = np.argsort(gate_counts, kind="stable")
    fig, ax = _figure()
    ax.plot(np.asarray(gate_counts)[order], np.asarray(l1_values)[order], marker="o", label="experiment")
    if baseline is not None:
        ax.axhline(baseline, color="black", linestyle="--", label="maximally mixed")
    if percentile is not None:
        ax.axhline(percentile, color="red", linestyle=":", label="finite-shot percentile")
    ax.set_xlabel("two-qubit gates")
    ax.set_ylabel("L1 of marginals")
    ax.legend()
    return _save(fig, path)
