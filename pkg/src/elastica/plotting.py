"""SVG figures: geodesic strips, matching diagnostics and distance heatmaps.

Figures are built on bare ``Figure`` objects (no pyplot state) and written
with a fixed hash salt and without a date stamp, so identical inputs give
identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib import rc_context
from matplotlib.figure import Figure

_RC = {"svg.hashsalt": "elastica", "font.size": 8, "axes.linewidth": 0.6}


def _save(fig, path):
    with rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")


def _closed_xy(points, closed):
    pts = np.asarray(points)
    if closed:
        pts = np.vstack([pts, pts[:1]])
    return pts[:, 0], pts[:, 1]


def default_snapshots(steps: int, every: int = 5):
    idx = list(range(0, steps + 1, every))
    if idx[-1] != steps:
        idx.append(steps)
    return idx


def geodesic_strip(curves, times, path, indices=None, closed=True, title=None):
    """Row of snapshots of a path of curves, sharing one scale."""
    indices = default_snapshots(len(curves) - 1) if indices is None else list(indices)
    with rc_context(_RC):
        fig = Figure(figsize=(1.6 * len(indices), 1.9))
        axes = fig.subplots(1, len(indices), squeeze=False)[0]
        allpts = np.vstack([np.asarray(curves[i].points) - np.asarray(curves[i].points).mean(0) for i in indices])
        span = np.abs(allpts).max() * 1.1
        for ax, i in zip(axes, indices):
            pts = np.asarray(curves[i].points)
            x, y = _closed_xy(pts - pts.mean(0), closed)
            ax.plot(x, y, lw=0.9, color="k")
            ax.set_xlim(-span, span)
            ax.set_ylim(-span, span)
            ax.set_aspect("equal")
            ax.set_xticks([])
            ax.set_yticks([])
            ax.set_title(f"t = {times[i]:.2f}")
        if title:
            fig.suptitle(title)
        _save(fig, path)


def matching_figure(template, target, result, path):
    """Template, reparameterized target with its grid, and the map psi."""
    with rc_context(_RC):
        fig = Figure(figsize=(9, 3))
        ax0, ax1, ax2 = fig.subplots(1, 3)
        x, y = _closed_xy(template.points, True)
        ax0.plot(x, y, lw=0.9, color="k")
        ax0.set_title("template")
        tp = np.asarray(result.path.curves()[-1].points) if result.path is not None else np.asarray(target.points)
        x, y = _closed_xy(target.points, True)
        ax1.plot(x, y, lw=0.9, color="0.6")
        ax1.plot(tp[:, 0] - tp.mean(0)[0] + np.mean(target.points[:, 0]), tp[:, 1] - tp.mean(0)[1] + np.mean(target.points[:, 1]), ".", ms=1.5, color="C3")
        ax1.set_title(f"target, {len(result.psi)} nodes")
        for ax in (ax0, ax1):
            ax.set_aspect("equal")
            ax.set_xticks([])
            ax.set_yticks([])
        psi = result.psi
        ax2.plot(psi.grid, psi.values, lw=0.8, color="k")
        ax2.plot(psi.grid, psi.values, "|", ms=3, color="C0")
        ax2.set_xlabel("x")
        ax2.set_ylabel("psi(x)")
        ax2.set_title("reparameterization")
        _save(fig, path)


def distance_heatmap(names, D, path):
    with rc_context(_RC):
        fig = Figure(figsize=(1.2 + 0.5 * len(names), 1 + 0.5 * len(names)))
        ax = fig.subplots()
        im = ax.imshow(D, cmap="viridis")
        ax.set_xticks(range(len(names)), names, rotation=60, ha="right")
        ax.set_yticks(range(len(names)), names)
        for i in range(len(names)):
            for j in range(len(names)):
                ax.text(j, i, f"{D[i, j]:.3g}", ha="center", va="center", color="w", fontsize=6)
        fig.colorbar(im, ax=ax, shrink=0.8)
        _save(fig, path)


def descent_figure(history, path):
    with rc_context(_RC):
        fig = Figure(figsize=(3.2, 2.4))
        ax = fig.subplots()
        ax.semilogy(np.arange(len(history)), history, "o-", ms=2, lw=0.8, color="k")
        ax.set_xlabel("accepted step")
        ax.set_ylabel("distance")
        _save(fig, path)
