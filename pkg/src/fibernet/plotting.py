"""Static SVG figures: load-displacement curves and the jump field on a network."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402

from .network import NetworkModel  # noqa: E402

_RC = {"svg.hashsalt": "fibernet", "svg.fonttype": "path"}


def _save(fig, path) -> Path:
    path = Path(path)
    with plt.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_curves(curves: dict[str, tuple[np.ndarray, np.ndarray]], path, xlabel="u [mm]",
                ylabel="reaction [N]", title="") -> Path:
    """One line per labelled (u, reaction) pair."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, (u, f) in curves.items():
            ax.plot(u, f, lw=1.2, label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.grid(alpha=0.3)
        if len(curves) > 1:
            ax.legend()
        fig.tight_layout()
    return _save(fig, path)


def plot_network(model: NetworkModel, values, path, displacement=None, scale: float = 1.0,
                 label: str = "ξ [mm]") -> Path:
    """Elements drawn as segments colored by ``values`` (one per element)."""
    xy = model.nodes[:, :2].copy()
    if displacement is not None:
        xy += scale * np.asarray(displacement).reshape(-1, 6)[:, :2]
    segs = xy[model.elements]
    vals = np.asarray(values, dtype=float)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(8, 8 * model.height / model.width + 1))
        lc = LineCollection(segs, array=vals, cmap="viridis", linewidths=0.6)
        ax.add_collection(lc)
        ax.set_aspect("equal")
        ax.autoscale()
        ax.set_xlabel("x [mm]")
        ax.set_ylabel("y [mm]")
        fig.colorbar(lc, ax=ax, label=label, shrink=0.8)
        fig.tight_layout()
    return _save(fig, path)
