"""Numerical sectional curvature of the lifted curve spaces.

Curvature of a submanifold M of a flat space follows from the Gauss
equation once the second fundamental form S(X, Y) = normal part of
d(Y)(X) is known. Tangent fields are extended to neighbourhoods by
projecting a fixed ambient vector, X_h(q) = h - normal_q(h), and their
derivatives are taken by central finite differences.

Two geometries are provided: closed curves lifted by the square root
velocity transform (normal space spanned by the closure constraint
gradients) and open curves lifted to a genuine cone (normal space given
node-wise by the cone normal, where the result must vanish).
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .closed_space import normal_basis
from .curves import DiscreteCurve, ElasticParams
from .errors import DegenerateBasis, TopologyError
from .transforms import LiftedCurve, elastic_metric

FD_STEP = 1e-5


def _inner(x, y, w):
    return float(np.sum(w * np.einsum("ij,ij->i", x, y)))


def constraint_normal_part(q: LiftedCurve, h):
    """Component of h along the normal space of the closure constraint (m = 2)."""
    nb = normal_basis(q)
    w = q.weights
    return _inner(h, nb.U1t, w) * nb.U1t + _inner(h, nb.U2t, w) * nb.U2t


def cone_normal_part(q: LiftedCurve, h):
    """Node-wise component of h along the unit normal of the cone."""
    p = q.params
    v = q.values
    N = np.column_stack([p.height**2 * v[:, 0], p.height**2 * v[:, 1], -p.a**2 * v[:, 2]])
    N /= np.linalg.norm(N, axis=1)[:, None]
    return np.einsum("ij,ij->i", h, N)[:, None] * N


def _geometry(q: LiftedCurve) -> Callable:
    if q.params.planar:
        if q.topology != "closed":
            return lambda qq, h: np.zeros_like(h)
        return constraint_normal_part
    if q.topology == "closed":
        raise TopologyError("curvature of closed curves is implemented for the planar lift (4b^2 = a^2) only")
    return cone_normal_part


def _shifted(q: LiftedCurve, dx) -> LiftedCurve:
    # off-manifold points are fine for the extension; skip the cone check
    obj = object.__new__(LiftedCurve)
    for name in ("grid", "params", "topology"):
        object.__setattr__(obj, name, getattr(q, name))
    object.__setattr__(obj, "values", q.values + dx)
    return obj


def tangent_extension(q: LiftedCurve, h, normal_part=None):
    normal_part = normal_part or _geometry(q)
    return np.asarray(h, dtype=float) - normal_part(q, np.asarray(h, dtype=float))


def second_fundamental_form(q: LiftedCurve, h, k, step=FD_STEP, normal_part=None):
    """S(X_h, X_k): normal part of the derivative of X_k along X_h."""
    normal_part = normal_part or _geometry(q)
    Xh = tangent_extension(q, h, normal_part)
    w = q.weights
    size = math.sqrt(_inner(Xh, Xh, w))
    if size == 0:
        return np.zeros_like(q.values)
    eps = step * q.norm() / size
    plus = tangent_extension(_shifted(q, eps * Xh), k, normal_part)
    minus = tangent_extension(_shifted(q, -eps * Xh), k, normal_part)
    return normal_part(q, (plus - minus) / (2 * eps))


def sectional_curvature_preshape(q: LiftedCurve, h, k, step=FD_STEP, normal_part=None):
    """<S(X,X), S(Y,Y)> - |S(X,Y)|^2 for the orthonormalized tangent plane of (X_h, X_k)."""
    normal_part = normal_part or _geometry(q)
    w = q.weights
    X = tangent_extension(q, h, normal_part)
    Y = tangent_extension(q, k, normal_part)
    nx = math.sqrt(_inner(X, X, w))
    ny = math.sqrt(_inner(Y, Y, w))
    if nx == 0 or ny == 0:
        raise DegenerateBasis("a tangent argument vanishes")
    X = X / nx
    Y = Y - _inner(Y, X, w) * X
    sin = math.sqrt(_inner(Y, Y, w)) / ny
    if sin < 1e-6:
        raise DegenerateBasis("tangent arguments are nearly parallel")
    Y = Y / (sin * ny)
    # X and Y are tangent at q, so they are their own extensions there
    Sxx = second_fundamental_form(q, X, X, step, normal_part)
    Syy = second_fundamental_form(q, Y, Y, step, normal_part)
    Sxy = second_fundamental_form(q, X, Y, step, normal_part)
    return _inner(Sxx, Syy, w) - _inner(Sxy, Sxy, w)


# --- O'Neill correction on shape space -------------------------------------------------


def horizontal_part(c: DiscreteCurve, h, p: ElasticParams, system=None):
    from .matching import vertical_field, vertical_project_lift, vertical_system
    from .transforms import r_differential

    system = system or vertical_system(c, p)
    mu = vertical_project_lift(c, r_differential(c, h, p), p, system)
    return np.asarray(h, dtype=float) - vertical_field(c, mu)


def _bracket(c: DiscreteCurve, X, Y, p: ElasticParams, step):
    """[X~, Y~](c) for the horizontal extensions of constant fields X and Y."""

    def lift(curve, f):
        return horizontal_part(curve, f, p)

    Xt, Yt = lift(c, X), lift(c, Y)
    scale = math.sqrt(max(np.mean(np.sum(c.points**2, axis=1)), 1e-300))

    def deriv(F, along):
        size = math.sqrt(np.mean(np.sum(along**2, axis=1)))
        eps = step * scale / size
        plus = lift(c.with_points(c.points + eps * along), F)
        minus = lift(c.with_points(c.points - eps * along), F)
        return (plus - minus) / (2 * eps)

    return deriv(Y, Xt) - deriv(X, Yt)


def oneill_term(c: DiscreteCurve, X, Y, p: ElasticParams, step=FD_STEP) -> float:
    """(3/4) |[X~, Y~]^vert|^2_G for G-orthonormalized horizontal parts of X, Y."""
    from .matching import vertical_project, vertical_system

    system = vertical_system(c, p)
    X = horizontal_part(c, X, p, system)
    Y = horizontal_part(c, Y, p, system)
    gx = elastic_metric(c, X, X, p)
    if gx <= 0:
        return 0.0
    X = X / math.sqrt(gx)
    Y = Y - elastic_metric(c, Y, X, p) * X
    gy = elastic_metric(c, Y, Y, p)
    if gy <= 1e-24:
        return 0.0
    Y = Y / math.sqrt(gy)
    br = _bracket(c, X, Y, p, step)
    mu = vertical_project(c, br, p)
    return 0.75 * system.inner(mu.values, mu.values)
