"""Deterministic analytic test shapes."""

from __future__ import annotations

import numpy as np

from .curves import CLOSED, OPEN, DiscreteCurve


def circle(n=300, r=1.0):
    return DiscreteCurve.from_function(lambda t: r * np.column_stack([np.cos(t), np.sin(t)]), n, CLOSED)


def ellipse(n=300, rx=2.0, ry=1.0):
    return DiscreteCurve.from_function(lambda t: np.column_stack([rx * np.cos(t), ry * np.sin(t)]), n, CLOSED)


def _fold_points(t, rx, ry, depth, width, center):
    # periodic bump pushed along the inward normal of the ellipse
    x, y = rx * np.cos(t), ry * np.sin(t)
    nx, ny = ry * np.cos(t), rx * np.sin(t)
    nn = np.hypot(nx, ny)
    bump = depth * np.exp(-(1 - np.cos(t - center)) / width**2)
    return np.column_stack([x - bump * nx / nn, y - bump * ny / nn])


def ellipse_fold(n=300, depth=0.8, width=0.1, rx=2.0, ry=1.0, center=np.pi / 2):
    """Ellipse with one narrow inward fold centred at parameter ``center``."""
    return DiscreteCurve.from_function(lambda t: _fold_points(t, rx, ry, depth, width, center), n, CLOSED)


def star(n=300, arms=5, amp=0.3, r=1.0):
    def f(t):
        rad = r * (1 + amp * np.cos(arms * t))
        return np.column_stack([rad * np.cos(t), rad * np.sin(t)])

    return DiscreteCurve.from_function(f, n, CLOSED)


def segment(n=100, length=2 * np.pi):
    """Straight open segment (theta * length / 2 pi, 0)."""
    return DiscreteCurve.from_function(lambda t: np.column_stack([t * length / (2 * np.pi), 0 * t]), n, OPEN)


def arc(n=100, radius=1.0, angle=np.pi):
    def f(t):
        s = t / (2 * np.pi) * angle - angle / 2
        return radius * np.column_stack([np.sin(s), 1 - np.cos(s)])

    return DiscreteCurve.from_function(f, n, OPEN)


KINDS = {
    "circle": circle,
    "ellipse": ellipse,
    "ellipse_fold": ellipse_fold,
    "star": star,
    "segment": segment,
    "arc": arc,
}


def make(kind: str, n: int, **params) -> DiscreteCurve:
    if kind not in KINDS:
        raise ValueError(f"unknown shape kind {kind!r}; choose from {sorted(KINDS)}")
    return KINDS[kind](n, **params)
