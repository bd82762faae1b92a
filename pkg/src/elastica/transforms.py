"""Transforms that pull a flat L2 metric back to reparameterization invariant metrics.

Every transform here has the form ``sqrt|c'| * f(c, D_s c, ...)`` and comes
with its analytic differential. The induced metric is the L2 product of
differentials, so ``elastic_metric`` and friends are exact pullbacks of
the discrete transforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .curves import (
    CLOSED,
    OPEN,
    DiscreteCurve,
    ElasticParams,
    arc_derivative,
    diff_matrix,
    dot,
    first_variations,
    frame,
    quadrature_weights,
)
from .errors import ConeViolation, TopologyError

CONE_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class LiftedCurve:
    """Image of a curve under the R-transform: values on the cone C^{a,b} (or R^2 minus 0)."""

    values: np.ndarray
    grid: np.ndarray
    params: ElasticParams
    topology: str = CLOSED

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[1] != self.params.dim:
            raise ValueError(f"lifted values must have shape (n, {self.params.dim})")
        grid = np.array(self.grid, dtype=float)
        if len(grid) != len(vals):
            raise ValueError("grid and values differ in length")
        vals.setflags(write=False)
        grid.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "grid", grid)
        check_cone(vals, self.params)

    def __len__(self):
        return len(self.values)

    @property
    def weights(self):
        return quadrature_weights(self.grid, self.topology)

    def with_values(self, values):
        return LiftedCurve(values, self.grid, self.params, self.topology)

    def norm(self):
        return l2_norm(self.values, self.weights)


def l2_inner(x, y, weights):
    return float(np.sum(weights[:, None] * x * y))


def l2_norm(x, weights):
    return float(np.sqrt(max(l2_inner(x, x, weights), 0.0)))


def cone_residual(values, params: ElasticParams):
    """Relative residual of the cone equation per node (zero for planar lifts)."""
    if params.planar:
        return np.zeros(len(values))
    a, b = params.a, params.b
    rho2 = values[:, 0] ** 2 + values[:, 1] ** 2
    lhs = (4 * b**2 - a**2) * rho2
    rhs = a**2 * values[:, 2] ** 2
    return np.abs(lhs - rhs) / np.maximum(lhs + rhs, np.finfo(float).tiny)


def check_cone(values, params: ElasticParams, rtol=CONE_RTOL):
    norms = np.linalg.norm(values, axis=1)
    scale = norms.mean() if len(norms) else 1.0
    if np.any(norms <= 1e-12 * max(scale, 1e-300)):
        j = int(np.argmin(norms))
        raise ConeViolation(f"lifted curve hits the apex at node {j}")
    if params.planar:
        return
    if np.any(values[:, 2] <= 0):
        raise ConeViolation("third component must be positive on the cone")
    res = cone_residual(values, params)
    if np.any(res > rtol):
        j = int(np.argmax(res))
        raise ConeViolation(f"node {j} is off the cone (relative residual {res[j]:.2e})")


# --- the R^{a,b} transform (SRVT for 4b^2 = a^2) -----------------------------


def r_transform(c: DiscreteCurve, p: ElasticParams) -> LiftedCurve:
    fr = frame(c)
    root = np.sqrt(fr.speed)
    planar = p.a * root[:, None] * fr.v
    if p.planar:
        vals = planar
    else:
        vals = np.column_stack([planar, p.height * root])
    return LiftedCurve(vals, c.grid, p, c.topology)


def r_differential(c: DiscreteCurve, h, p: ElasticParams) -> np.ndarray:
    """D_{c,h} R^{a,b}, the analytic differential of the transform."""
    fr = frame(c)
    dh = arc_derivative(c, np.asarray(h, dtype=float))
    hn = dot(dh, fr.n)
    hv = dot(dh, fr.v)
    root = np.sqrt(fr.speed)[:, None]
    planar = root * (p.a * hn[:, None] * fr.n + 0.5 * p.a * hv[:, None] * fr.v)
    if p.planar:
        return planar
    return np.column_stack([planar, 0.5 * p.height * root[:, 0] * hv])


def lifted_velocity(values, params: ElasticParams):
    """c' recovered from lifted values: |q| (q1, q2) / (2ab)."""
    norm = np.linalg.norm(values, axis=1)
    return norm[:, None] * values[:, :2] / (2 * params.a * params.b)


def r_inverse(q: LiftedCurve, basepoint=(0.0, 0.0)) -> DiscreteCurve:
    """Recover the curve from c' = |q| (q1, q2)/(2ab), starting at ``basepoint``.

    Open lifts invert the discrete derivative in the least-squares sense, so
    r_inverse(r_transform(c)) returns c up to rounding. Closed lifts integrate
    with the trapezoid rule (the last node then carries the closure defect).
    """
    check_cone(q.values, q.params)
    g = lifted_velocity(q.values, q.params)
    if q.topology == OPEN:
        A = diff_matrix(q.grid, OPEN).tocsc()[:, 1:]
        rest = spla.spsolve((A.T @ A).tocsc(), A.T @ g)
        pts = np.vstack([np.zeros((1, 2)), np.asarray(rest).reshape(-1, 2)])
    else:
        gaps = np.diff(q.grid)
        steps = 0.5 * gaps[:, None] * (g[1:] + g[:-1])
        pts = np.vstack([np.zeros((1, 2)), np.cumsum(steps, axis=0)])
    pts += np.asarray(basepoint, dtype=float)
    return DiscreteCurve(pts, q.grid, q.topology)


def closure_defect(q: LiftedCurve) -> np.ndarray:
    """c(theta_0 + 2 pi) - c(theta_0) of the integrated curve (periodic trapezoid)."""
    if q.topology != CLOSED:
        raise TopologyError("closure defect is defined for closed lifts")
    g = lifted_velocity(q.values, q.params)
    return quadrature_weights(q.grid, CLOSED) @ g


def elastic_metric(c: DiscreteCurve, h, k, p: ElasticParams) -> float:
    """int a^2 <D_s h, n><D_s k, n> + b^2 <D_s h, v><D_s k, v> ds."""
    fr = frame(c)
    dh = arc_derivative(c, np.asarray(h, dtype=float))
    dk = arc_derivative(c, np.asarray(k, dtype=float))
    integrand = p.a**2 * dot(dh, fr.n) * dot(dk, fr.n) + p.b**2 * dot(dh, fr.v) * dot(dk, fr.v)
    return float(np.sum(c.weights * fr.speed * integrand))


def srvt_metric_explicit(c: DiscreteCurve, h, k) -> float:
    """The (1, 1/2) metric written without the frame:
    int <h',k'>/|c'| - 3/4 <h',c'><k',c'>/|c'|^3 d(theta)."""
    dh = c.diff(np.asarray(h, dtype=float))
    dk = c.diff(np.asarray(k, dtype=float))
    s = c.speed
    cp = c.velocity
    integrand = dot(dh, dk) / s - 0.75 * dot(dh, cp) * dot(dk, cp) / s**3
    return float(np.sum(c.weights * integrand))


def pullback_metric(c: DiscreteCurve, Dh, Dk) -> float:
    """Flat L2 product of two transform differentials."""
    return float(np.sum(c.weights[:, None] * np.asarray(Dh) * np.asarray(Dk)))


# --- Q-transform ----------------------------------------------------------------


def q_transform(c: DiscreteCurve) -> np.ndarray:
    return np.sqrt(c.speed)[:, None] * c.points


def q_differential(c: DiscreteCurve, h) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    fr = frame(c)
    hv = dot(arc_derivative(c, h), fr.v)
    return np.sqrt(fr.speed)[:, None] * (h + 0.5 * hv[:, None] * c.points)


def q_metric(c: DiscreteCurve, h, k) -> float:
    """int < h + 1/2 <D_s h, v> c, k + 1/2 <D_s k, v> c > ds."""
    fr = frame(c)
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    hh = h + 0.5 * dot(arc_derivative(c, h), fr.v)[:, None] * c.points
    kk = k + 0.5 * dot(arc_derivative(c, k), fr.v)[:, None] * c.points
    return float(np.sum(c.weights * fr.speed * dot(hh, kk)))


# --- Younes transform (open curves) --------------------------------------------


def _require_open(c):
    if c.topology != OPEN:
        raise TopologyError("the Younes transform is only characterized for open curves")


def younes_transform(c: DiscreteCurve) -> np.ndarray:
    """2 sqrt|c'| (cos(alpha/2), sin(alpha/2)) with the turning angle lift fixed at node 0.

    The factor 2 makes the pullback exactly int |D_s h|^2 ds.
    """
    _require_open(c)
    fr = frame(c)
    half = 0.5 * fr.alpha
    return 2 * np.sqrt(fr.speed)[:, None] * np.column_stack([np.cos(half), np.sin(half)])


def younes_differential(c: DiscreteCurve, h) -> np.ndarray:
    _require_open(c)
    fr = frame(c)
    dh = arc_derivative(c, np.asarray(h, dtype=float))
    hn = dot(dh, fr.n)
    hv = dot(dh, fr.v)
    half = 0.5 * fr.alpha
    e = np.column_stack([np.cos(half), np.sin(half)])
    e_perp = np.column_stack([-np.sin(half), np.cos(half)])
    return np.sqrt(fr.speed)[:, None] * (hv[:, None] * e + hn[:, None] * e_perp)


# --- K transform (second order) ------------------------------------------------


def k_transform(c: DiscreteCurve) -> np.ndarray:
    fr = frame(c)
    kappa = dot(arc_derivative(c, fr.v), fr.n)
    return np.sqrt(fr.speed)[:, None] * np.column_stack([fr.v, kappa])


def k_differential(c: DiscreteCurve, h) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    fr = frame(c)
    dh = arc_derivative(c, h)
    hn = dot(dh, fr.n)
    hv = dot(dh, fr.v)
    kappa = dot(arc_derivative(c, fr.v), fr.n)
    var = first_variations(c, h)
    # <D_s^2 h, n> in the form consistent with the discrete curvature
    h2n = var.Dkappa + 2 * kappa * hv
    top = 0.5 * hv[:, None] * fr.v + hn[:, None] * fr.n
    bottom = h2n - 1.5 * kappa * hv
    return np.sqrt(fr.speed)[:, None] * np.column_stack([top, bottom])


def k_metric(c: DiscreteCurve, h, k) -> float:
    """Polarized second order metric
    int <D2h,n><D2k,n> - 3/2 kappa(<D2h,n><Dk,v> + <D2k,n><Dh,v>) + <Dh,n><Dk,n>
        + 1/4 (1 + 9 kappa^2) <Dh,v><Dk,v> ds."""
    fr = frame(c)
    kappa = dot(arc_derivative(c, fr.v), fr.n)

    def parts(x):
        x = np.asarray(x, dtype=float)
        dx = arc_derivative(c, x)
        xn, xv = dot(dx, fr.n), dot(dx, fr.v)
        x2n = first_variations(c, x).Dkappa + 2 * kappa * xv
        return x2n, xn, xv

    h2n, hn, hv = parts(h)
    k2n, kn, kv = parts(k)
    integrand = (
        h2n * k2n
        - 1.5 * kappa * (h2n * kv + k2n * hv)
        + hn * kn
        + 0.25 * (1 + 9 * kappa**2) * hv * kv
    )
    return float(np.sum(c.weights * fr.speed * integrand))


# --- general construction sqrt|c'| f(c, D_s c) ---------------------------------


def _jet(c: DiscreteCurve, order):
    if order == 1:
        return np.array(c.points)
    if order == 2:
        fr = frame(c)
        return np.column_stack([c.points, fr.v])
    raise ValueError("only jets of order 1 (c) and 2 (c, D_s c) are supported")


def general_f_transform(c: DiscreteCurve, f, order=2) -> np.ndarray:
    """sqrt|c'| * f(c, D_s c) node-wise; ``f`` maps (n, 2*order) to (n, k)."""
    vals = np.asarray(f(_jet(c, order)), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    return np.sqrt(c.speed)[:, None] * vals


def general_f_differential(c: DiscreteCurve, h, f, jac, order=2) -> np.ndarray:
    """Chain rule: sqrt|c'| (1/2 <D_s h, v> f + J_f . (h, D_{c,h} v)).

    ``jac`` maps (n, 2*order) to (n, k, 2*order).
    """
    h = np.asarray(h, dtype=float)
    fr = frame(c)
    x = _jet(c, order)
    hv = dot(arc_derivative(c, h), fr.v)
    if order == 1:
        dx = h
    else:
        dx = np.column_stack([h, first_variations(c, h).Dv])
    vals = np.asarray(f(x), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    J = np.asarray(jac(x), dtype=float).reshape(len(c), vals.shape[1], dx.shape[1])
    return np.sqrt(fr.speed)[:, None] * (0.5 * hv[:, None] * vals + np.einsum("ikl,il->ik", J, dx))


def general_f_metric(c: DiscreteCurve, h, k, f, jac, order=2) -> float:
    return pullback_metric(
        c, general_f_differential(c, h, f, jac, order), general_f_differential(c, k, f, jac, order)
    )


__all__ = [
    "LiftedCurve",
    "check_cone",
    "closure_defect",
    "elastic_metric",
    "general_f_differential",
    "general_f_metric",
    "general_f_transform",
    "k_differential",
    "k_metric",
    "k_transform",
    "l2_inner",
    "l2_norm",
    "pullback_metric",
    "q_differential",
    "q_metric",
    "q_transform",
    "r_differential",
    "r_inverse",
    "r_transform",
    "srvt_metric_explicit",
    "younes_differential",
    "younes_transform",
]
