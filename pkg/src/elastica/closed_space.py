"""Geodesics between parameterized closed curves.

Closed curves lift to the codimension-2 submanifold of cone curves with
``F(q) = int rho(q) (q1, q2) dtheta = 0``, ``rho = sqrt(q1^2 + q2^2)``.
Geodesics are computed by constrained Hamiltonian shooting (RATTLE) in the
flat chart coordinates of the cone, and boundary value problems by a
fixed-point iteration on the initial momentum.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .curves import CLOSED, DiscreteCurve, ElasticParams
from .errors import (
    ConeViolation,
    DegenerateBasis,
    GridMismatch,
    NewtonDivergence,
    NoConvergence,
    TopologyError,
)
from .open_space import chart_angles, chart_differential, chart_map, chart_pullback, chart_radius
from .transforms import LiftedCurve, check_cone, r_inverse, r_transform

log = logging.getLogger(__name__)

TOL_F = 1e-10
MAX_NEWTON = 50
APEX_RTOL = 1e-9


def _winner(x, y, w):
    """Weighted L2 product of node-wise vector fields."""
    return float(np.sum(w * np.einsum("ij,ij->i", x, y)))


# --- constraint --------------------------------------------------------------------


def constraint(q: LiftedCurve) -> np.ndarray:
    """F(q) by trapezoid quadrature."""
    check_cone(q.values, q.params)
    v = q.values[:, :2]
    rho = np.hypot(v[:, 0], v[:, 1])
    return q.weights @ (rho[:, None] * v)


def ambient_constraint_gradients(values):
    """Euclidean gradients of F1, F2 node-wise in the ambient space of the lift."""
    q1, q2 = values[:, 0], values[:, 1]
    rho = np.hypot(q1, q2)
    dim = values.shape[1]
    G1 = np.zeros((len(q1), dim))
    G2 = np.zeros((len(q1), dim))
    G1[:, 0] = (2 * q1**2 + q2**2) / rho
    G1[:, 1] = q1 * q2 / rho
    G2[:, 0] = q1 * q2 / rho
    G2[:, 1] = (q1**2 + 2 * q2**2) / rho
    return G1, G2


def cone_tangent_project(values, h, params: ElasticParams):
    """Orthogonal projection of ambient fields onto the cone's tangent planes."""
    if params.planar:
        return np.asarray(h, dtype=float)
    beta = params.height**2
    N = np.column_stack([beta * values[:, 0], beta * values[:, 1], -params.a**2 * values[:, 2]])
    coef = np.einsum("ij,ij->i", h, N) / np.einsum("ij,ij->i", N, N)
    return h - coef[:, None] * N


def tangency_residual(values, h, params: ElasticParams):
    """(4b^2-a^2)(q1 h1 + q2 h2) - a^2 q3 h3 node-wise."""
    if params.planar:
        return np.zeros(len(values))
    return params.height**2 * (values[:, 0] * h[:, 0] + values[:, 1] * h[:, 1]) - params.a**2 * values[:, 2] * h[:, 2]


def slot_corrected_normal_fields(q: LiftedCurve):
    """Ambient gradients of F made tangent by a correction in the q3 slot only.

    These are tangent to the cone but in general not orthogonal to the kernel
    of DF; normal_basis uses the orthogonal projection instead.
    """
    G1, G2 = ambient_constraint_gradients(q.values)
    p = q.params
    if not p.planar:
        G1[:, 2] = 2 / p.a * p.height * q.values[:, 0]
        G2[:, 2] = 2 / p.a * p.height * q.values[:, 1]
    return G1, G2


@dataclass(frozen=True, eq=False)
class NormalBasis:
    U1: np.ndarray
    U2: np.ndarray
    U1t: np.ndarray  # orthonormalized
    U2t: np.ndarray
    gram: np.ndarray


def _gram_schmidt(U1, U2, w):
    n1 = math.sqrt(_winner(U1, U1, w))
    if n1 < 1e-10:
        raise DegenerateBasis("first normal field vanishes")
    E1 = U1 / n1
    R = U2 - _winner(U2, E1, w) * E1
    n2 = math.sqrt(_winner(R, R, w))
    if n2 < 1e-10:
        raise DegenerateBasis("normal fields are linearly dependent")
    return E1, R / n2


def normal_basis(q: LiftedCurve) -> NormalBasis:
    """L2 gradients of F1, F2 on the cone curves and an orthonormal version."""
    check_cone(q.values, q.params)
    if np.any(np.hypot(q.values[:, 0], q.values[:, 1]) == 0):
        raise ConeViolation("lift vanishes at a node")
    G1, G2 = ambient_constraint_gradients(q.values)
    U1 = cone_tangent_project(q.values, G1, q.params)
    U2 = cone_tangent_project(q.values, G2, q.params)
    E1, E2 = _gram_schmidt(U1, U2, q.weights)
    w = q.weights
    gram = np.array([[_winner(E1, E1, w), _winner(E1, E2, w)], [_winner(E2, E1, w), _winner(E2, E2, w)]])
    return NormalBasis(U1, U2, E1, E2, gram)


def proj(q: LiftedCurve, p) -> np.ndarray:
    """Orthogonal projection of a cone-tangent field onto the tangent space of the constraint set."""
    nb = normal_basis(q)
    w = q.weights
    p = cone_tangent_project(q.values, np.asarray(p, dtype=float), q.params)
    return p - _winner(p, nb.U1t, w) * nb.U1t - _winner(p, nb.U2t, w) * nb.U2t


def project_to_constraint(q: LiftedCurve, tol=TOL_F, max_iter=MAX_NEWTON) -> LiftedCurve:
    """Newton projection onto F = 0 along the normal fields (in chart coordinates)."""
    st = _ChartState.from_lift(q)
    for _ in range(max_iter):
        F = st.F()
        if np.abs(F).max() <= tol:
            return st.lift(q.grid)
        g1, g2 = st.grads()
        J = np.array([[_winner(g1, g1, st.w), _winner(g1, g2, st.w)], [_winner(g2, g1, st.w), _winner(g2, g2, st.w)]])
        lam = np.linalg.solve(J, -F)
        st = st.moved(lam[0] * g1 + lam[1] * g2)
    raise NewtonDivergence("projection onto the closure constraint failed", step=0, residual=float(np.abs(st.F()).max()))


# --- chart coordinates -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _ChartState:
    """Node-wise chart coordinates z = r e^{i phi} with a continuously tracked angle."""

    z: np.ndarray  # complex
    phi: np.ndarray
    w: np.ndarray
    params: ElasticParams
    topology: str = CLOSED

    @classmethod
    def from_lift(cls, q: LiftedCurve):
        r = chart_radius(q.values, q.params)
        phi = chart_angles(q.values, q.params)
        return cls(r * np.exp(1j * phi), phi, q.weights, q.params, q.topology)

    @property
    def x(self):
        return np.column_stack([self.z.real, self.z.imag])

    @property
    def r(self):
        return np.abs(self.z)

    def moved(self, dx):
        z = self.z + dx[:, 0] + 1j * dx[:, 1]
        r = np.abs(z)
        if np.any(r <= APEX_RTOL * max(r.max(), 1e-300)):
            bad = np.flatnonzero(r <= APEX_RTOL * r.max())
            raise ConeViolation(f"{len(bad)} node(s) reached the cone apex")
        phi = self.phi + np.angle(z / self.z)
        return _ChartState(z, phi, self.w, self.params, self.topology)

    def F(self):
        m = self.params.cone_ratio
        f = self.r**2 * np.exp(1j * m * self.phi) / m**2
        s = self.w @ f
        return np.array([s.real, s.imag])

    def grads(self):
        m = self.params.cone_ratio
        r, phi = self.r, self.phi
        e = np.exp(1j * m * phi)
        d1 = e * (2 * r * np.cos(phi) / m**2 - 1j * r * np.sin(phi) / m)
        d2 = e * (2 * r * np.sin(phi) / m**2 + 1j * r * np.cos(phi) / m)
        return np.column_stack([d1.real, d2.real]), np.column_stack([d1.imag, d2.imag])

    def values(self):
        return chart_map(self.r, self.phi, self.params)

    def lift(self, grid):
        return LiftedCurve(self.values(), grid, self.params, self.topology)

    def to_chart(self, dq):
        return chart_differential(self.values(), dq, self.params, self.phi)

    def from_chart(self, dx):
        return chart_pullback(self.values(), dx, self.params, self.phi)


def _gram(g1, g2, h1, h2, w):
    return np.array([[_winner(g1, h1, w), _winner(g1, h2, w)], [_winner(g2, h1, w), _winner(g2, h2, w)]])


def _tangent(st: _ChartState, p):
    g1, g2 = st.grads()
    G = _gram(g1, g2, g1, g2, st.w)
    c = np.linalg.solve(G, [_winner(p, g1, st.w), _winner(p, g2, st.w)])
    return p - c[0] * g1 - c[1] * g2


# --- RATTLE ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GeodesicPath:
    """States and momenta of a discrete constrained geodesic."""

    times: np.ndarray
    states: list
    momenta: list
    diagnostics: dict = field(default_factory=dict)

    @property
    def start(self) -> LiftedCurve:
        return self.states[0]

    @property
    def end(self) -> LiftedCurve:
        return self.states[-1]

    @property
    def length(self) -> float:
        """Constant speed times unit time: the L2 norm of the initial momentum."""
        return math.sqrt(2 * self.diagnostics["energy"][0])

    def curves(self, basepoint=(0.0, 0.0)):
        return [r_inverse(s, basepoint) for s in self.states]

    def reversed(self) -> "GeodesicPath":
        return GeodesicPath(
            1 - self.times[::-1],
            self.states[::-1],
            [-m for m in self.momenta[::-1]],
            {k: (v[::-1] if isinstance(v, list) else v) for k, v in self.diagnostics.items()},
        )


def exp_rattle(q: LiftedCurve, p, N: int = 25, tol_F: float = TOL_F, max_newton: int = MAX_NEWTON) -> GeodesicPath:
    """Shoot from q with initial cone-tangent momentum p over unit time in N RATTLE steps."""
    if q.topology != CLOSED:
        raise TopologyError("exp_rattle integrates closed-curve lifts")
    check_cone(q.values, q.params)
    st = _ChartState.from_lift(q)
    F0 = st.F()
    if np.abs(F0).max() > max(tol_F, 1e-8):
        raise ConeViolation(f"start point violates the closure constraint, |F| = {np.abs(F0).max():.3e}")
    dt = 1.0 / N
    mom = _tangent(st, st.to_chart(np.asarray(p, dtype=float)))
    grid = q.grid
    w = st.w

    states = [q]
    momenta = [st.from_chart(mom)]
    energy = [0.5 * _winner(mom, mom, w)]
    fres = [float(np.abs(F0).max())]
    lams, mus, iters = [], [], []
    lam = np.zeros(2)
    for i in range(N):
        g1, g2 = st.grads()
        base = mom
        for it in range(max_newton + 1):
            pbar = base + 0.5 * dt * (lam[0] * g1 + lam[1] * g2)
            try:
                nxt = st.moved(dt * pbar)
            except ConeViolation as exc:
                raise ConeViolation(f"step {i}: {exc}") from exc
            F = nxt.F()
            if np.abs(F).max() <= tol_F:
                break
            if it == max_newton:
                raise NewtonDivergence(f"multiplier solve failed at step {i}", step=i, residual=float(np.abs(F).max()))
            h1, h2 = nxt.grads()
            J = 0.5 * dt**2 * _gram(h1, h2, g1, g2, w)
            try:
                lam = lam - np.linalg.solve(J, F)
            except np.linalg.LinAlgError as exc:
                raise NewtonDivergence(f"singular multiplier Jacobian at step {i}", step=i, residual=float(np.abs(F).max())) from exc
            if not np.all(np.isfinite(lam)):
                raise NewtonDivergence(f"multiplier solve diverged at step {i}", step=i, residual=float(np.abs(F).max()))
        h1, h2 = nxt.grads()
        G = _gram(h1, h2, h1, h2, w)
        mu = -np.linalg.solve(G, [_winner(pbar, h1, w), _winner(pbar, h2, w)]) / (0.5 * dt)
        mom = pbar + 0.5 * dt * (mu[0] * h1 + mu[1] * h2)
        st = nxt
        lift = st.lift(grid)
        states.append(lift)
        momenta.append(st.from_chart(mom))
        energy.append(0.5 * _winner(mom, mom, w))
        fres.append(float(np.abs(F).max()))
        lams.append(lam.copy())
        mus.append(mu)
        iters.append(it)
    diag = {"F": fres, "energy": energy, "lambda": lams, "mu": mus, "newton_iterations": iters}
    return GeodesicPath(np.linspace(0.0, 1.0, N + 1), states, momenta, diag)


# --- boundary value problem ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LogResult:
    p: np.ndarray
    residuals: list
    iterations: int
    converged: bool
    path: GeodesicPath | None = None

    @property
    def distance(self) -> float:
        return self.path.length if self.path is not None else 0.0


def _same_grid(q0, q1):
    if len(q0.grid) != len(q1.grid) or not np.allclose(q0.grid, q1.grid, rtol=0, atol=1e-12):
        raise GridMismatch("lifts must share one grid")


def log_shooting(
    q0: LiftedCurve,
    q1: LiftedCurve,
    N: int = 25,
    eps_bvp: float | None = None,
    max_iter: int = 500,
    p_init=None,
    tol_F: float = TOL_F,
    raise_on_failure: bool = True,
) -> LogResult:
    """Initial momentum p with Exp(q0, p) = q1 by a damped fixed-point iteration.

    Each sweep shoots, measures the endpoint mismatch q1 - Exp(q0, p), projects it
    to the tangent space at q0 and adds alpha times it to p. alpha starts at 1,
    grows by 1.2 after an accepted step and halves when the mismatch does not
    decrease. ``p_init`` warm-starts the iteration.
    """
    _same_grid(q0, q1)
    w = q0.weights
    norm1 = math.sqrt(_winner(q1.values, q1.values, w))
    if eps_bvp is None:
        eps_bvp = 1e-3 * norm1

    def mismatch(path):
        d = q1.values - path.end.values
        return d, math.sqrt(_winner(d, d, w))

    d0 = q1.values - q0.values
    if math.sqrt(_winner(d0, d0, w)) <= eps_bvp and p_init is None:
        zero = np.zeros_like(q0.values)
        return LogResult(zero, [math.sqrt(_winner(d0, d0, w))], 0, True, exp_rattle(q0, zero, N, tol_F))

    p = proj(q0, d0) if p_init is None else proj(q0, p_init)
    path = exp_rattle(q0, p, N, tol_F)
    d, res = mismatch(path)
    residuals = [res]
    alpha = 1.0
    it = 0
    while res > eps_bvp and it < max_iter:
        it += 1
        trial = p + alpha * proj(q0, d)
        try:
            tpath = exp_rattle(q0, trial, N, tol_F)
            td, tres = mismatch(tpath)
        except (ConeViolation, NewtonDivergence) as exc:
            log.debug("shot failed (%s); halving step", exc)
            tres = math.inf
        if tres < res:
            p, path, d, res = trial, tpath, td, tres
            residuals.append(res)
            alpha *= 1.2
        else:
            alpha *= 0.5
            if alpha < 1e-12:
                break
    result = LogResult(path.momenta[0], residuals, it, res <= eps_bvp, path)
    if not result.converged and raise_on_failure:
        raise NoConvergence(f"boundary value solve stopped at residual {res:.3e} > {eps_bvp:.3e}", result)
    return result


def param_distance(c0: DiscreteCurve, c1: DiscreteCurve, p: ElasticParams, N: int = 25, **kw):
    """Distance between parameterized closed curves and the connecting path."""
    if c0.topology != CLOSED or c1.topology != CLOSED:
        raise TopologyError("param_distance expects closed curves")
    q0 = project_to_constraint(r_transform(c0, p))
    q1 = project_to_constraint(r_transform(c1, p))
    _same_grid(q0, q1)
    res = log_shooting(q0, q1, N, **kw)
    return res.distance, res.path
