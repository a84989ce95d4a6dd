"""SVG figures of partitions and run histories.

Figures are written with a fixed hash salt and no date so the same data gives
byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Polygon as PolygonPatch  # noqa: E402

from .geometry import ConvexPolygon  # noqa: E402

SVG_META = {"Date": None}
plt.rcParams["svg.hashsalt"] = "equipart"


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=SVG_META)
    plt.close(fig)


def _pieces(cell):
    if isinstance(cell, ConvexPolygon):
        return (cell,)
    return tuple(cell)


def draw_cells(ax, region: ConvexPolygon, cells, generators=None, centroids=None, cmap="Pastel1"):
    """Draw ``cells`` (polygons or tuples of polygon pieces) inside ``region``."""
    colors = plt.get_cmap(cmap)
    for k, cell in enumerate(cells):
        for piece in _pieces(cell):
            if piece.is_empty:
                continue
            ax.add_patch(PolygonPatch(piece.vertices, closed=True, facecolor=colors(k % colors.N), edgecolor="k", lw=0.8))
    ax.add_patch(PolygonPatch(region.vertices, closed=True, fill=False, edgecolor="k", lw=1.5))
    if generators is not None:
        g = np.asarray(generators)
        ax.plot(g[:, 0], g[:, 1], "s", color="gold", mec="k", ms=6, label="generators")
    if centroids is not None:
        c = np.asarray(centroids)
        ax.plot(c[:, 0], c[:, 1], "o", color="tab:blue", ms=4, label="centroids")
    lo = region.vertices.min(axis=0)
    hi = region.vertices.max(axis=0)
    pad = 0.03 * float(np.max(hi - lo))
    ax.set_xlim(lo[0] - pad, hi[0] + pad)
    ax.set_ylim(lo[1] - pad, hi[1] + pad)
    ax.set_aspect("equal")
    ax.set_xticks([])
    ax.set_yticks([])


def save_partition(path, region, cells, generators=None, centroids=None, title=None):
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    draw_cells(ax, region, cells, generators, centroids)
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    _save(fig, path)


def save_history(path, rows):
    """Cost, area error and mean isoperimetric ratio against time."""
    t = np.array([r["t"] for r in rows])
    fig, axes = plt.subplots(3, 1, figsize=(5, 6), sharex=True)
    axes[0].plot(t, [r["HV"] for r in rows])
    axes[0].set_ylabel("H")
    axes[1].semilogy(t, np.maximum([r["area_error"] for r in rows], 1e-16))
    axes[1].set_ylabel("area error")
    axes[2].plot(t, [r["Q_mean"] for r in rows])
    axes[2].set_ylabel("mean Q")
    axes[2].set_xlabel("t")
    fig.tight_layout()
    _save(fig, path)


def save_batch_summary(path, finals, title=None):
    """Histograms of the final area error, Voronoi defect and Q over a batch."""
    fig, axes = plt.subplots(1, 3, figsize=(9, 3))
    for ax, key, label in zip(axes, ("area_error", "voronoi_defect", "Q_mean"), ("area error", "Voronoi defect", "mean Q")):
        ax.hist([f[key] for f in finals], bins=15, color="tab:gray", edgecolor="k")
        ax.set_xlabel(label)
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    _save(fig, path)
