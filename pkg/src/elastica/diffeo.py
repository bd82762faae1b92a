"""Discrete orientation preserving diffeomorphisms of the circle and their flows."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .curves import TWO_PI, _frozen
from .errors import MonotonicityLost

log = logging.getLogger(__name__)

KINDS = ("linear", "pchip", "cubic")


def _periodic_nodes(grid, values, lift=True):
    """Append the wrap-around node (value shifted by 2 pi for lifts)."""
    x = np.append(grid, grid[0] + TWO_PI)
    y = np.append(values, values[0] + (TWO_PI if lift else 0.0))
    return x, y


@dataclass(frozen=True, eq=False)
class CircleDiffeo:
    """Lift psi of a circle diffeomorphism, sampled on a grid of [x0, x0 + 2 pi).

    ``psi(x + 2 pi) = psi(x) + 2 pi``; values between nodes come from linear,
    monotone cubic (pchip, the default) or plain cubic interpolation of the
    periodic displacement psi(x) - x.
    """

    grid: np.ndarray
    values: np.ndarray
    kind: str = "pchip"

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.shape != values.shape or grid.ndim != 1:
            raise ValueError("grid and values must be 1-d arrays of equal length")
        if self.kind not in KINDS:
            raise ValueError(f"unknown interpolation kind {self.kind!r}")
        object.__setattr__(self, "grid", _frozen(grid))
        object.__setattr__(self, "values", _frozen(values))
        steps = np.diff(np.append(values, values[0] + TWO_PI))
        if np.any(steps <= 0) or not np.all(np.isfinite(values)):
            bad = int(np.argmin(steps))
            raise MonotonicityLost(f"diffeomorphism is not strictly increasing near node {bad}")

    @classmethod
    def identity(cls, grid, kind="pchip"):
        return cls(np.asarray(grid, dtype=float), np.asarray(grid, dtype=float), kind)

    @classmethod
    def rotation(cls, grid, s, kind="pchip"):
        return cls(np.asarray(grid, dtype=float), np.asarray(grid, dtype=float) + s, kind)

    @classmethod
    def from_function(cls, f, grid, kind="pchip"):
        return cls(grid, f(np.asarray(grid, dtype=float)), kind)

    def __len__(self):
        return len(self.grid)

    def _interp(self):
        x, y = _periodic_nodes(self.grid, self.values - self.grid, lift=False)
        if self.kind == "linear":
            return lambda t: np.interp(t, x, y)
        if self.kind == "pchip":
            # pad one period on both sides so the end slopes see the periodic neighbours
            xx = np.concatenate([x[:-1] - TWO_PI, x[:-1], x[:-1] + TWO_PI, x[-1:] + TWO_PI])
            yy = np.concatenate([y[:-1], y[:-1], y[:-1], y[-1:]])
            return PchipInterpolator(xx, yy)
        return CubicSpline(x, y, bc_type="periodic")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        x0 = self.grid[0]
        k = np.floor((x - x0) / TWO_PI)
        xr = x - TWO_PI * k
        return xr + self._interp()(xr) + TWO_PI * k

    def gaps(self):
        """psi(x_{j+1}) - psi(x_j), cyclically."""
        return np.diff(np.append(self.values, self.values[0] + TWO_PI))

    def resampled(self, grid):
        return CircleDiffeo(grid, self(grid), self.kind)

    def min_derivative(self, factor=10):
        """Smallest slope on a grid ``factor`` times finer (dense positivity check)."""
        fine = np.linspace(self.grid[0], self.grid[0] + TWO_PI, factor * len(self.grid) + 1)
        vals = self(fine)
        return float(np.min(np.diff(vals) / np.diff(fine)))


@dataclass(frozen=True, eq=False)
class CircleField:
    """Periodic real function on a grid, evaluated by a periodic cubic spline."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "grid", _frozen(np.asarray(self.grid, dtype=float)))
        object.__setattr__(self, "values", _frozen(np.asarray(self.values, dtype=float)))
        if self.grid.shape != self.values.shape:
            raise ValueError("grid and values must have equal length")

    def spline(self):
        x, y = _periodic_nodes(self.grid, self.values, lift=False)
        return CubicSpline(x, y, bc_type="periodic")

    def __call__(self, x):
        return self.spline()(np.asarray(x, dtype=float))

    def __neg__(self):
        return CircleField(self.grid, -self.values)

    def __mul__(self, s):
        return CircleField(self.grid, s * self.values)

    __rmul__ = __mul__

    def sup(self):
        return float(np.abs(self.values).max())


def compose(psi: CircleDiffeo, eta: CircleDiffeo) -> CircleDiffeo:
    """(psi o eta) sampled on eta's grid."""
    vals = psi(eta.values)
    return CircleDiffeo(eta.grid, vals, psi.kind)


def flow(mu: CircleField, alpha: float, substeps: int | None = None, kind="pchip") -> CircleDiffeo:
    """Time-alpha flow of x' = mu(x) from the identity, classical Runge-Kutta."""
    grid = mu.grid
    if alpha == 0 or mu.sup() == 0:
        return CircleDiffeo.identity(grid, kind)
    if substeps is None:
        spacing = float(np.min(np.diff(np.append(grid, grid[0] + TWO_PI))))
        substeps = max(1, math.ceil(mu.sup() * abs(alpha) / (0.5 * spacing)))
    s = mu.spline()
    h = alpha / substeps
    x = np.array(grid, dtype=float)
    for _ in range(substeps):
        k1 = s(x)
        k2 = s(x + 0.5 * h * k1)
        k3 = s(x + 0.5 * h * k2)
        k4 = s(x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return CircleDiffeo(grid, x, kind)


# --- adaptive grids ---------------------------------------------------------------------


@dataclass
class RefinementLog:
    inserted: list = field(default_factory=list)
    removed: list = field(default_factory=list)
    capped: bool = False

    @property
    def changed(self):
        return bool(self.inserted or self.removed)


def refine_grid(psi: CircleDiffeo, n0: int, cap: int = 8) -> tuple[CircleDiffeo, RefinementLog]:
    """One sweep of midpoint insertion and node removal.

    A midpoint is inserted into every cell whose image under psi is wider than
    2 pi / n0. Node i is removed when both its neighbours are closer than
    2 pi / n0 in the grid and in the image; two adjacent nodes are never removed
    in the same sweep and the first node is kept. The grid never exceeds
    cap * n0 nodes; hitting that bound sets ``capped``.
    """
    h0 = TWO_PI / n0
    x = np.asarray(psi.grid)
    n = len(x)
    xw = np.append(x, x[0] + TWO_PI)
    yw = np.append(psi.values, psi.values[0] + TWO_PI)
    rec = RefinementLog()

    remove = np.zeros(n, dtype=bool)
    for i in range(1, n):
        if remove[i - 1]:
            continue
        if xw[i + 1] - xw[i - 1] < h0 and yw[i + 1] - yw[i - 1] < h0:
            remove[i] = True
    wide = np.flatnonzero(np.diff(yw) > h0 * (1 + 1e-9))
    # a removed node cannot border a wide cell (its image neighbours are close), so both act independently
    budget = cap * n0 - (n - int(remove.sum()))
    if len(wide) > budget:
        rec.capped = True
        order = np.argsort(-np.diff(yw)[wide], kind="stable")
        wide = np.sort(wide[order[: max(budget, 0)]])
        log.warning("refinement cap of %d nodes reached", cap * n0)

    mids = 0.5 * (xw[wide] + xw[wide + 1])
    keep = x[~remove]
    new_grid = np.sort(np.concatenate([keep, mids]))
    rec.inserted = mids.tolist()
    rec.removed = x[remove].tolist()
    if not rec.changed:
        return psi, rec
    return psi.resampled(new_grid), rec


def refine_until_fixed(psi: CircleDiffeo, n0: int, cap: int = 8, max_sweeps: int = 64):
    """Repeat refine_grid until the grid stops changing or the cap is reached."""
    logs = []
    for _ in range(max_sweeps):
        psi, rec = refine_grid(psi, n0, cap)
        if rec.changed or rec.capped:
            logs.append(rec)
        if not rec.changed or rec.capped:
            break
    return psi, logs
