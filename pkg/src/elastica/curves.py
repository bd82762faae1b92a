"""Discrete calculus on sampled plane curves.

Curves are sampled on a strictly increasing parameter grid in [0, 2*pi].
Closed curves are periodic (the grid excludes the duplicate endpoint),
open curves include both endpoints. Derivatives use three point stencils
that are exact for quadratics on non-uniform grids; integrals use the
(periodic) trapezoid rule with matching weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import GridMismatch, RegularityError, TopologyError

TWO_PI = 2.0 * np.pi
OPEN = "open"
CLOSED = "closed"


def uniform_grid(n, topology):
    if topology == CLOSED:
        return np.arange(n) * (TWO_PI / n)
    return np.linspace(0.0, TWO_PI, n)


def grid_gaps(grid, topology):
    """Cell widths; closed grids include the wrap-around cell as the last entry."""
    gaps = np.diff(grid)
    if topology == CLOSED:
        gaps = np.append(gaps, TWO_PI - grid[-1] + grid[0])
    return gaps


def quadrature_weights(grid, topology):
    """Trapezoid weights, periodic for closed grids."""
    gaps = grid_gaps(grid, topology)
    if topology == CLOSED:
        return 0.5 * (gaps + np.roll(gaps, 1))
    w = np.zeros(len(grid))
    w[:-1] += 0.5 * gaps
    w[1:] += 0.5 * gaps
    return w


def stencil(grid, topology):
    """Index and weight arrays (n, 3) of the first derivative stencil.

    ``f'[j] = sum_k W[j, k] * f[I[j, k]]``.
    """
    n = len(grid)
    idx = np.empty((n, 3), dtype=np.intp)
    wts = np.empty((n, 3))
    if topology == CLOSED:
        gaps = grid_gaps(grid, topology)
        h1 = np.roll(gaps, 1)
        h2 = gaps
        j = np.arange(n)
        idx[:, 0] = (j - 1) % n
        idx[:, 1] = j
        idx[:, 2] = (j + 1) % n
    else:
        gaps = np.diff(grid)
        h1 = np.ones(n)
        h2 = np.ones(n)
        h1[1:-1] = gaps[:-1]
        h2[1:-1] = gaps[1:]
        j = np.arange(n)
        idx[:, 0] = j - 1
        idx[:, 1] = j
        idx[:, 2] = j + 1
    wts[:, 0] = -h2 / (h1 * (h1 + h2))
    wts[:, 1] = (h2 - h1) / (h1 * h2)
    wts[:, 2] = h1 / (h2 * (h1 + h2))
    if topology == OPEN:
        # one-sided quadratic stencils at the endpoints
        a, b = gaps[0], gaps[1]
        idx[0] = (0, 1, 2)
        wts[0] = (-(2 * a + b) / (a * (a + b)), (a + b) / (a * b), -a / (b * (a + b)))
        a, b = gaps[-2], gaps[-1]
        idx[-1] = (n - 3, n - 2, n - 1)
        wts[-1] = (b / (a * (a + b)), -(a + b) / (a * b), (a + 2 * b) / (b * (a + b)))
    return idx, wts


def diff_matrix(grid, topology):
    """Sparse matrix of the first derivative stencil."""
    idx, wts = stencil(grid, topology)
    n = len(grid)
    rows = np.repeat(np.arange(n), 3)
    return sp.csr_matrix((wts.ravel(), (rows, idx.ravel())), shape=(n, n))


def check_grid(grid, topology):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1:
        raise ValueError("grid must be one-dimensional")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if topology == CLOSED and TWO_PI - grid[-1] + grid[0] <= 0:
        raise ValueError("closed grid must span less than one period")
    return grid


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ElasticParams:
    """Weights of the elastic metric: ``a`` bending, ``b`` stretching."""

    a: float = 1.0
    b: float = 0.5

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("a and b must be positive")
        if 4 * self.b**2 < self.a**2:
            raise ValueError("elastic parameters need 4 b^2 >= a^2")

    @property
    def planar(self):
        """True when the lift has no third component (4b^2 == a^2)."""
        return 4 * self.b**2 == self.a**2

    @property
    def dim(self):
        return 2 if self.planar else 3

    @property
    def cone_ratio(self):
        """The ratio m = 2b/a of the polar chart of the cone."""
        return 2 * self.b / self.a

    @property
    def height(self):
        """sqrt(4b^2 - a^2), the constant third component for unit speed."""
        return float(np.sqrt(max(4 * self.b**2 - self.a**2, 0.0)))


SRVT = ElasticParams(1.0, 0.5)


@dataclass(frozen=True, eq=False)
class DiscreteCurve:
    """A plane curve sampled on a parameter grid.

    ``reg_factor`` scales the regularity floor: every node must have speed
    above ``reg_factor * mean(speed)``.
    """

    points: np.ndarray
    grid: np.ndarray
    topology: str = CLOSED
    reg_factor: float = field(default=1e-8, repr=False)

    def __post_init__(self):
        if self.topology not in (OPEN, CLOSED):
            raise TopologyError(f"unknown topology {self.topology!r}")
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must have shape (n, 2)")
        if len(pts) < 4:
            raise ValueError("a curve needs at least 4 nodes")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        grid = check_grid(self.grid, self.topology)
        if len(grid) != len(pts):
            raise GridMismatch("grid and points differ in length")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "grid", _frozen(grid))
        speed = self.speed
        floor = self.reg_factor * speed.mean()
        bad = np.flatnonzero(speed <= floor)
        if len(bad) or not np.all(np.isfinite(speed)):
            j = int(bad[0]) if len(bad) else None
            raise RegularityError(f"curve is not regular at node {j}", index=j)

    @classmethod
    def uniform(cls, points, topology=CLOSED, **kw):
        return cls(points, uniform_grid(len(points), topology), topology, **kw)

    @classmethod
    def from_function(cls, f, n, topology=CLOSED, grid=None, **kw):
        """Sample ``f(theta) -> (n, 2)`` on a (default uniform) grid."""
        if grid is None:
            grid = uniform_grid(n, topology)
        return cls(np.asarray(f(np.asarray(grid))), grid, topology, **kw)

    def __len__(self):
        return len(self.points)

    @property
    def closed(self):
        return self.topology == CLOSED

    @cached_property
    def weights(self):
        return quadrature_weights(self.grid, self.topology)

    @cached_property
    def _stencil(self):
        return stencil(self.grid, self.topology)

    def diff(self, f):
        """Apply the first derivative stencil to nodal data of shape (n, ...)."""
        idx, wts = self._stencil
        f = np.asarray(f, dtype=float)
        w = wts.reshape(wts.shape + (1,) * (f.ndim - 1))
        return (w * f[idx]).sum(axis=1)

    @cached_property
    def velocity(self):
        return _frozen(self.diff(self.points))

    @cached_property
    def speed(self):
        return _frozen(np.linalg.norm(self.velocity, axis=1))

    @property
    def eps_reg(self):
        return self.reg_factor * float(self.speed.mean())

    def with_points(self, points):
        return DiscreteCurve(points, self.grid, self.topology, self.reg_factor)

    def translate(self, p):
        return self.with_points(self.points + np.asarray(p, dtype=float))

    def length(self):
        return integrate_ds(self, np.ones(len(self)))


class Frame(NamedTuple):
    speed: np.ndarray
    v: np.ndarray
    n: np.ndarray
    alpha: np.ndarray
    turning_number: int


def rot90(x):
    """Rotate vectors (..., 2) by +pi/2."""
    return np.stack([-x[..., 1], x[..., 0]], axis=-1)


def derivative(c: DiscreteCurve) -> np.ndarray:
    return np.array(c.velocity)


def unwrap_angles(theta):
    """Continuous lift: consecutive increments mapped into (-pi, pi]."""
    theta = np.asarray(theta, dtype=float)
    steps = np.diff(theta)
    steps = steps - TWO_PI * np.ceil((steps - np.pi) / TWO_PI)
    return np.concatenate([theta[:1], theta[0] + np.cumsum(steps)])


def frame(c: DiscreteCurve) -> Frame:
    """Speed, unit tangent, unit normal and the unwrapped turning angle."""
    speed = c.speed
    v = c.velocity / speed[:, None]
    alpha = unwrap_angles(np.arctan2(v[:, 1], v[:, 0]))
    turning = 0
    if c.closed:
        last = alpha[-1]
        wrap = np.arctan2(v[0, 1], v[0, 0]) - last
        wrap -= TWO_PI * np.ceil((wrap - np.pi) / TWO_PI)
        turning = int(round((last + wrap - alpha[0]) / TWO_PI))
    return Frame(np.array(speed), v, rot90(v), alpha, turning)


def arc_derivative(c: DiscreteCurve, f) -> np.ndarray:
    """D_s f = f' / |c'| for scalar (n,) or vector (n, k) nodal data."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] != len(c):
        raise GridMismatch("field and curve differ in length")
    df = c.diff(f)
    return df / c.speed.reshape((-1,) + (1,) * (f.ndim - 1))


def curvature(c: DiscreteCurve) -> np.ndarray:
    fr = frame(c)
    return np.einsum("ij,ij->i", arc_derivative(c, fr.v), fr.n)


def integrate_ds(c: DiscreteCurve, f) -> float:
    """Trapezoid quadrature of f |c'| d(theta)."""
    return float(np.sum(c.weights * c.speed * np.asarray(f, dtype=float)))


def integrate(grid_or_curve, f, topology=None) -> float:
    """Trapezoid quadrature of f d(theta) (no arc-length factor)."""
    if isinstance(grid_or_curve, DiscreteCurve):
        w = grid_or_curve.weights
    else:
        w = quadrature_weights(np.asarray(grid_or_curve), topology)
    out = np.tensordot(w, np.asarray(f, dtype=float), axes=(0, 0))
    return float(out) if out.ndim == 0 else out


def dot(x, y):
    return np.einsum("ij,ij->i", x, y)


class Variations(NamedTuple):
    Dv: np.ndarray
    Dn: np.ndarray
    Dspeed: np.ndarray
    Dkappa: np.ndarray


def first_variations(c: DiscreteCurve, h, exact=True) -> Variations:
    """First variations of v, n, |c'| and kappa in the direction h.

    With ``exact=True`` the curvature variation is written as
    ``<D_s(<D_s h, n> n), n> - <D_s h, n><D_s v, v> - kappa <D_s h, v>``,
    which is the exact derivative of the discrete curvature and converges
    to ``<D_s^2 h, n> - 2 kappa <D_s h, v>``. ``exact=False`` evaluates the
    latter literally with the stencil applied twice.
    """
    h = np.asarray(h, dtype=float)
    fr = frame(c)
    dh = arc_derivative(c, h)
    hn = dot(dh, fr.n)
    hv = dot(dh, fr.v)
    Dv = hn[:, None] * fr.n
    Dn = -hn[:, None] * fr.v
    Dspeed = hv * fr.speed
    dsv = arc_derivative(c, fr.v)
    kappa = dot(dsv, fr.n)
    if exact:
        Dkappa = dot(arc_derivative(c, Dv), fr.n) - hn * dot(dsv, fr.v) - kappa * hv
    else:
        Dkappa = dot(arc_derivative(c, dh), fr.n) - 2 * kappa * hv
    return Variations(Dv, Dn, Dspeed, Dkappa)


def periodic_spline(c: DiscreteCurve):
    """Periodic cubic spline through a closed curve (period 2*pi)."""
    from scipy.interpolate import CubicSpline

    if not c.closed:
        raise TopologyError("periodic spline needs a closed curve")
    x = np.append(c.grid, c.grid[0] + TWO_PI)
    y = np.vstack([c.points, c.points[:1]])
    return CubicSpline(x, y, bc_type="periodic")


def resample(c: DiscreteCurve, grid, kind="linear") -> DiscreteCurve:
    """Evaluate c on another grid, piecewise-linear or periodic cubic in theta."""
    grid = np.asarray(grid, dtype=float)
    if kind == "cubic" and c.closed:
        pts = periodic_spline(c)(grid)
    elif c.closed:
        x = np.append(c.grid, c.grid[0] + TWO_PI)
        y = np.vstack([c.points, c.points[:1]])
        t = c.grid[0] + np.mod(grid - c.grid[0], TWO_PI)
        pts = np.column_stack([np.interp(t, x, y[:, 0]), np.interp(t, x, y[:, 1])])
    else:
        if kind == "cubic":
            from scipy.interpolate import CubicSpline

            pts = CubicSpline(c.grid, c.points)(grid)
        else:
            pts = np.column_stack(
                [np.interp(grid, c.grid, c.points[:, 0]), np.interp(grid, c.grid, c.points[:, 1])]
            )
    return DiscreteCurve(pts, grid, c.topology, c.reg_factor)


def arclength_reparam(c: DiscreteCurve, n=None) -> DiscreteCurve:
    """Resample c on a uniform grid with nodes equidistant in arc length."""
    n = n or len(c)
    if c.closed:
        spline = periodic_spline(c)
        fine = np.linspace(c.grid[0], c.grid[0] + TWO_PI, 20 * n + 1)
    else:
        from scipy.interpolate import CubicSpline

        spline = CubicSpline(c.grid, c.points)
        fine = np.linspace(c.grid[0], c.grid[-1], 20 * n + 1)
    sp_ = np.linalg.norm(spline(fine, 1), axis=1)
    s = np.concatenate([[0.0], np.cumsum(0.5 * (sp_[1:] + sp_[:-1]) * np.diff(fine))])
    grid = uniform_grid(n, c.topology)
    targets = grid / TWO_PI * s[-1]
    theta = np.interp(targets, s, fine)
    return DiscreteCurve(spline(theta), grid, c.topology, c.reg_factor)
