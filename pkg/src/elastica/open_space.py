"""Flat geometry of open curves modulo translations.

The cone C^{a,b} is covered isometrically by the punctured plane through
``q(r, phi) = (r/m cos(m phi), r/m sin(m phi), sqrt(4b^2-a^2)/(2b) r)``
with ``m = 2b/a``. In these chart coordinates geodesics of open curves are
node-wise straight segments, provided one branch index ``k`` is used for
every node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .curves import OPEN, TWO_PI, DiscreteCurve, ElasticParams, arc_derivative, diff_matrix, dot, frame
from .errors import ConeViolation, DegenerateInterior, ExistenceTimeExceeded, GridMismatch
from .transforms import LiftedCurve, check_cone, r_differential, r_inverse, r_transform

APEX_RTOL = 1e-9


# --- chart of the cone ------------------------------------------------------------


def chart_radius(values, params: ElasticParams):
    values = np.atleast_2d(values)
    if params.planar:
        return np.hypot(values[:, 0], values[:, 1])
    return 2 * params.b / params.height * values[:, 2]


def cone_lift(q, params: ElasticParams, k=0):
    """Polar chart coordinates (r, phi) of a single cone point on branch k."""
    q = np.asarray(q, dtype=float)
    check_cone(q[None, :], params)
    r = float(chart_radius(q, params)[0])
    phi = (math.atan2(q[1], q[0]) + TWO_PI * k) / params.cone_ratio
    return r, phi


def chart_map(r, phi, params: ElasticParams):
    """Inverse of the chart: cone points from (r, phi) arrays."""
    r = np.asarray(r, dtype=float)
    phi = np.asarray(phi, dtype=float)
    m = params.cone_ratio
    out = [r / m * np.cos(m * phi), r / m * np.sin(m * phi)]
    if not params.planar:
        out.append(params.height / (2 * params.b) * r)
    return np.stack(out, axis=-1)


def chart_angles(values, params: ElasticParams, continuous=True):
    """Chart angle per node; ``continuous`` unwraps along the curve before scaling."""
    ang = np.arctan2(values[:, 1], values[:, 0])
    if continuous:
        ang = np.unwrap(ang)
    return ang / params.cone_ratio


def chart_coords(values, params: ElasticParams, phi=None):
    """Euclidean chart coordinates x = r (cos phi, sin phi)."""
    r = chart_radius(values, params)
    if phi is None:
        phi = chart_angles(values, params)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def chart_differential(values, dq, params: ElasticParams, phi=None):
    """Push a cone tangent field forward to chart coordinates (an isometry)."""
    m = params.cone_ratio
    if phi is None:
        phi = chart_angles(values, params)
    z = (dq[:, 0] + 1j * dq[:, 1]) * np.exp(-1j * m * phi)
    dx = (m * z.real + 1j * z.imag) * np.exp(1j * phi)
    return np.column_stack([dx.real, dx.imag])


def chart_pullback(values, dx, params: ElasticParams, phi=None):
    """Inverse of chart_differential: chart vectors to cone tangent vectors."""
    m = params.cone_ratio
    if phi is None:
        phi = chart_angles(values, params)
    r = chart_radius(values, params)
    w = (dx[:, 0] + 1j * dx[:, 1]) * np.exp(-1j * phi)
    dr = w.real
    dphi = w.imag / r
    z = (dr / m + 1j * r * dphi) * np.exp(1j * m * phi)
    out = [z.real, z.imag]
    if not params.planar:
        out.append(params.height / (2 * params.b) * dr)
    return np.column_stack(out)


def cone_distance(q, qbar, params: ElasticParams):
    """Distance on the cone between two points and the minimizing branch k."""
    q = np.asarray(q, dtype=float)
    qbar = np.asarray(qbar, dtype=float)
    check_cone(np.vstack([q, qbar]), params)
    if params.planar:
        return float(np.linalg.norm(q - qbar)), 0
    a, b = params.a, params.b
    dang = math.atan2(q[1], q[0]) - math.atan2(qbar[1], qbar[0])
    kmax = math.ceil(2 * b / a) + 1
    best = None
    for k in sorted(range(-kmax, kmax + 1), key=abs):
        val = (4 * b**2 / (4 * b**2 - a**2)) * (
            q[2] ** 2 + qbar[2] ** 2 - 2 * q[2] * qbar[2] * math.cos(a / (2 * b) * dang + a / b * k * math.pi)
        )
        if best is None or val < best[0] - 1e-15 * abs(val):
            best = (val, k)
    return math.sqrt(max(best[0], 0.0)), best[1]


# --- node-wise straight segments in the universal cover ----------------------------


def _segment_path(r0, phi0, X1, t):
    """Point at time t on the segment from (r0, 0) to X1 in the frame rotated by phi0."""
    X = (1 - t) * np.column_stack([r0, np.zeros_like(r0)]) + t * X1
    return np.hypot(X[:, 0], X[:, 1]), phi0 + np.arctan2(X[:, 1], X[:, 0])


def _closest_approach(r0, X1):
    """Parameter and distance of the segment's closest point to the apex."""
    d = X1 - np.column_stack([r0, np.zeros_like(r0)])
    dd = np.einsum("ij,ij->i", d, d)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(dd > 0, -r0 * d[:, 0] / dd, 0.0)
    s = np.clip(s, 0.0, 1.0)
    X = np.column_stack([r0, np.zeros_like(r0)]) + s[:, None] * d
    return s, np.hypot(X[:, 0], X[:, 1])


def _check_same_grid(q0, q1):
    if len(q0.grid) != len(q1.grid) or not np.allclose(q0.grid, q1.grid, rtol=0, atol=1e-12):
        raise GridMismatch("curves must share one parameter grid (resample first)")


def best_branch(r0, phi0, r1, phi1, weights, params: ElasticParams):
    """Global branch k minimizing the integrated squared chart distance."""
    if params.planar:
        return 0, phi1 - phi0
    shift = params.a / params.b * math.pi
    kmax = math.ceil(2 * params.b / params.a) + 1
    best = None
    for k in sorted(range(-kmax, kmax + 1), key=abs):
        dphi = phi1 + k * shift - phi0
        val = np.sum(weights * (r0**2 + r1**2 - 2 * r0 * r1 * np.cos(dphi)))
        if best is None or val < best[0] - 1e-14 * abs(val):
            best = (val, k, dphi)
    return best[1], best[2]


@dataclass(frozen=True, eq=False)
class OpenGeodesic:
    """Closed-form geodesic between two open curves in the flat lifted space."""

    q0: LiftedCurve
    q1: LiftedCurve
    branch_k: int
    r0: np.ndarray
    phi0: np.ndarray
    X1: np.ndarray  # endpoint in the frame rotated by phi0
    basepoints: tuple

    @property
    def params(self):
        return self.q0.params

    @property
    def distance(self):
        d = self.X1 - np.column_stack([self.r0, np.zeros_like(self.r0)])
        return float(np.sqrt(np.sum(self.q0.weights * np.einsum("ij,ij->i", d, d))))

    def eval(self, t) -> LiftedCurve:
        if t == 0:
            return self.q0
        if t == 1:
            return self.q1
        r, phi = _segment_path(self.r0, self.phi0, self.X1, t)
        return LiftedCurve(chart_map(r, phi, self.params), self.q0.grid, self.params, OPEN)

    def curve(self, t) -> DiscreteCurve:
        base = (1 - t) * np.asarray(self.basepoints[0]) + t * np.asarray(self.basepoints[1])
        return r_inverse(self.eval(t), base)

    def velocity(self) -> np.ndarray:
        """Constant chart velocity (per node, in the frame rotated by phi0)."""
        return self.X1 - np.column_stack([self.r0, np.zeros_like(self.r0)])


def open_geodesic(c0: DiscreteCurve, c1: DiscreteCurve, p: ElasticParams, check_apex=True) -> OpenGeodesic:
    q0 = r_transform(c0, p)
    q1 = r_transform(c1, p)
    _check_same_grid(q0, q1)
    return geodesic_between_lifts(q0, q1, (c0.points[0], c1.points[0]), check_apex)


def geodesic_between_lifts(q0: LiftedCurve, q1: LiftedCurve, basepoints=((0, 0), (0, 0)), check_apex=True):
    p = q0.params
    _check_same_grid(q0, q1)
    r0, phi0 = chart_radius(q0.values, p), chart_angles(q0.values, p)
    r1, phi1 = chart_radius(q1.values, p), chart_angles(q1.values, p)
    k, dphi = best_branch(r0, phi0, r1, phi1, q0.weights, p)
    X1 = np.column_stack([r1 * np.cos(dphi), r1 * np.sin(dphi)])
    if check_apex:
        s, dist = _closest_approach(r0, X1)
        scale = max(r0.max(), r1.max())
        bad = np.flatnonzero((np.abs(dphi) >= math.pi) | (dist <= APEX_RTOL * scale))
        if len(bad):
            raise DegenerateInterior(
                f"{len(bad)} node path(s) pass through the cone apex", nodes=bad, times=s[bad]
            )
    return OpenGeodesic(q0, q1, k, r0, phi0, X1, tuple(np.asarray(b, dtype=float) for b in basepoints))


def open_distance(c0: DiscreteCurve, c1: DiscreteCurve, p: ElasticParams) -> float:
    """sqrt of the integral of squared pointwise cone distances, one branch for all nodes."""
    q0 = r_transform(c0, p)
    q1 = r_transform(c1, p)
    _check_same_grid(q0, q1)
    w = q0.weights
    if p.planar:
        d = q0.values - q1.values
        return float(np.sqrt(np.sum(w * np.einsum("ij,ij->i", d, d))))
    a, b = p.a, p.b
    u, ubar = q0.values, q1.values
    dang = np.unwrap(np.arctan2(u[:, 1], u[:, 0])) - np.unwrap(np.arctan2(ubar[:, 1], ubar[:, 0]))
    kmax = math.ceil(2 * b / a) + 1
    vals = []
    for k in range(-kmax, kmax + 1):
        d2 = (4 * b**2 / (4 * b**2 - a**2)) * (
            u[:, 2] ** 2 + ubar[:, 2] ** 2 - 2 * u[:, 2] * ubar[:, 2] * np.cos(a / (2 * b) * dang + a / b * k * math.pi)
        )
        vals.append(np.sum(w * d2))
    return float(np.sqrt(max(min(vals), 0.0)))


def chart_distance(c0: DiscreteCurve, c1: DiscreteCurve, p: ElasticParams) -> float:
    """L2 distance of consistently lifted chart representatives."""
    geo = open_geodesic(c0, c1, p, check_apex=False)
    r1 = chart_radius(geo.q1.values, p)
    phi1 = geo.phi0 + np.arctan2(geo.X1[:, 1], geo.X1[:, 0])
    x0 = np.column_stack([geo.r0 * np.cos(geo.phi0), geo.r0 * np.sin(geo.phi0)])
    x1 = np.column_stack([r1 * np.cos(phi1), r1 * np.sin(phi1)])
    d = x0 - x1
    return float(np.sqrt(np.sum(geo.q0.weights * np.einsum("ij,ij->i", d, d))))


# --- explicit solution of the geodesic equation ---------------------------------------


def explicit_exp(c0: DiscreteCurve, u0, t, p: ElasticParams) -> DiscreteCurve:
    """Geodesic from c0 with initial velocity u0 at time t, with c(t)(0) = 0.

    The lifted path is the chart straight line through R(c0) with velocity
    D_{c0,u0} R; for 4b^2 = a^2 this is R(c0) + t D_{c0,u0} R.
    """
    q = explicit_exp_lift(c0, u0, t, p)
    return r_inverse(q, (0.0, 0.0))


def explicit_exp_lift(c0: DiscreteCurve, u0, t, p: ElasticParams) -> LiftedCurve:
    q0 = r_transform(c0, p)
    r0 = chart_radius(q0.values, p)
    phi0 = chart_angles(q0.values, p)
    dx = chart_differential(q0.values, r_differential(c0, u0, p), p, phi0)
    # rotate velocities into the frame anchored at phi0
    rot = np.exp(-1j * phi0) * (dx[:, 0] + 1j * dx[:, 1])
    W = np.column_stack([rot.real, rot.imag])
    if t != 0:
        X1 = np.column_stack([r0, np.zeros_like(r0)]) + t * W
        s, dist = _closest_approach(r0, X1)
        scale = r0.max()
        bad = dist <= APEX_RTOL * scale
        if np.any(bad):
            t_max = float(t * s[bad].min())
            raise ExistenceTimeExceeded(f"geodesic reaches the apex at t = {t_max:.6g}", t_max)
        r, phi = _segment_path(r0, phi0, X1, 1.0)
    else:
        r, phi = r0, phi0
    return LiftedCurve(chart_map(r, phi, p), c0.grid, p, c0.topology)


def log_velocity(c0: DiscreteCurve, c1: DiscreteCurve, p: ElasticParams) -> np.ndarray:
    """Initial velocity u0 with explicit_exp(c0, u0, 1) = c1 (up to translation).

    The constant chart velocity of the connecting geodesic is pulled back to
    the cone and then through the differential of the R-transform.
    """
    geo = open_geodesic(c0, c1, p, check_apex=False)
    W = geo.velocity()
    rot = np.exp(1j * geo.phi0) * (W[:, 0] + 1j * W[:, 1])
    dq = chart_pullback(geo.q0.values, np.column_stack([rot.real, rot.imag]), p, geo.phi0)
    return invert_r_differential(c0, dq, p)


def invert_r_differential(c: DiscreteCurve, dq, p: ElasticParams) -> np.ndarray:
    """Field h with D_{c,h} R = dq (tangent to the cone) and h(theta_0) = 0.

    The node-wise target derivative is recovered from dq, then the discrete
    derivative operator is inverted in the least-squares sense so that
    r_differential(c, h) reproduces dq up to the range of that operator.
    """
    fr = frame(c)
    root = np.sqrt(fr.speed)
    hn = dot(dq[:, :2], fr.n) / (p.a * root)
    hv = 2 * dot(dq[:, :2], fr.v) / (p.a * root)
    target = (hn[:, None] * fr.n + hv[:, None] * fr.v) * fr.speed[:, None]
    A = diff_matrix(c.grid, c.topology).tocsc()[:, 1:]
    h = spla.spsolve((A.T @ A).tocsc(), A.T @ target)
    return np.vstack([np.zeros((1, 2)), np.asarray(h).reshape(-1, 2)])


def operator_A(c: DiscreteCurve, h, p: ElasticParams):
    fr = frame(c)
    dh = arc_derivative(c, h)
    return p.a**2 * dot(dh, fr.n)[:, None] * fr.n + p.b**2 * dot(dh, fr.v)[:, None] * fr.v


def operator_B(c: DiscreteCurve, h, p: ElasticParams):
    fr = frame(c)
    dh = arc_derivative(c, h)
    hn, hv = dot(dh, fr.n), dot(dh, fr.v)
    return (p.a**2 * hn**2 + p.b**2 * hv**2)[:, None] * fr.v - 2 * (p.b**2 - p.a**2) * (hn * hv)[:, None] * fr.n


def _time_derivative(samples, dt):
    """Fourth order finite differences along axis 0 (one-sided near the ends)."""
    f = np.asarray(samples)
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * dt)
    for i in (0, 1):
        out[i] = (-25 * f[i] + 48 * f[i + 1] - 36 * f[i + 2] + 16 * f[i + 3] - 3 * f[i + 4]) / (12 * dt)
        j = len(f) - 1 - i
        out[j] = (25 * f[j] - 48 * f[j - 1] + 36 * f[j - 2] - 16 * f[j - 3] + 3 * f[j - 4]) / (12 * dt)
    return out


def geodesic_equation_residual(curves, dt, p: ElasticParams):
    """(A_c c_t)_t + 1/2 B_c(c_t, c_t) node-wise for a path sampled at spacing dt.

    Returns (residual, scale) arrays of shape (T, n, 2) and (T,), where
    scale is the sup norm of the individual terms.
    """
    pts = np.stack([c.points for c in curves])
    ct = _time_derivative(pts, dt)
    A = np.stack([operator_A(c, ct[i], p) for i, c in enumerate(curves)])
    At = _time_derivative(A, dt)
    B = np.stack([operator_B(c, ct[i], p) for i, c in enumerate(curves)])
    res = At + 0.5 * B
    scale = np.maximum(np.abs(At).max(axis=(1, 2)), 0.5 * np.abs(B).max(axis=(1, 2)))
    return res, scale
