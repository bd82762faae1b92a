"""Matching of unparameterized closed curves by descent on Diff(S^1).

The vertical space at c consists of the fields c' mu. Its G-orthogonal
projection is computed by a Galerkin solve with nodal basis functions under
the discrete metric, which is the L2 product of lifted differentials. The
gradient of E(psi) = dist(c, d o psi)^2 / 2 with respect to right
perturbations psi o Fl(nu, eps) is the vertical part of Log_c(d o psi).
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .closed_space import GeodesicPath, LogResult, log_shooting, project_to_constraint
from .curves import CLOSED, TWO_PI, DiscreteCurve, ElasticParams, frame, periodic_spline, stencil
from .diffeo import CircleDiffeo, CircleField, compose, flow, refine_until_fixed
from .errors import (
    ConeViolation,
    IncompletenessDetected,
    MonotonicityLost,
    NewtonDivergence,
    NoConvergence,
    SingularSystem,
    TopologyError,
)
from .transforms import r_differential, r_transform

log = logging.getLogger(__name__)


# --- vertical projection ------------------------------------------------------------------


def vertical_operator(c: DiscreteCurve, p: ElasticParams) -> sp.csr_matrix:
    """Sparse matrix T with T @ mu = D_{c, c' mu} R flattened node-major.

    For open curves mu vanishes at both ends and T has one column per interior node.
    """
    fr = frame(c)
    idx, wts = stencil(c.grid, c.topology)
    n, dim = len(c), p.dim
    root = np.sqrt(fr.speed)
    # node-wise map from the theta-derivative of h to D R: M_j (dim x 2)
    M = np.zeros((n, dim, 2))
    M[:, :2, :] = (p.a * np.einsum("ji,jk->jik", fr.n, fr.n) + 0.5 * p.a * np.einsum("ji,jk->jik", fr.v, fr.v)) / root[:, None, None]
    if not p.planar:
        M[:, 2, :] = 0.5 * p.height * fr.v / root[:, None]
    vel = c.velocity
    rows, cols, vals = [], [], []
    for s in range(3):
        k = idx[:, s]
        # contribution of mu_k to row j: M_j (w_js c'_k)
        block = np.einsum("jik,jk->ji", M, wts[:, s, None] * vel[k])
        for i in range(dim):
            rows.append(np.arange(n) * dim + i)
            cols.append(k)
            vals.append(block[:, i])
    T = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n * dim, n))
    if c.topology != CLOSED:
        T = T[:, 1:-1]
    return T


@dataclass(frozen=True, eq=False)
class VerticalSystem:
    T: sp.csr_matrix
    B: sp.csc_matrix
    weights: np.ndarray
    dim: int
    closed: bool = True

    def expand(self, mu):
        """Node values of mu (zero at the ends of open curves)."""
        return mu if self.closed else np.concatenate([[0.0], mu, [0.0]])

    def restrict(self, mu):
        mu = mu.values if isinstance(mu, CircleField) else np.asarray(mu)
        return mu if self.closed else mu[1:-1]

    def rhs(self, dq):
        return self.T.T @ (np.repeat(self.weights, self.dim) * np.asarray(dq).ravel())

    def inner(self, mu, nu):
        """<mu, nu> = G_c(c' mu, c' nu) for node-value arrays or fields."""
        mu, nu = self.restrict(mu), self.restrict(nu)
        return float(mu @ (self.B @ nu))

    def solve(self, L):
        try:
            mu = spla.spsolve(self.B, L)
            ok = np.all(np.isfinite(mu)) and np.linalg.norm(self.B @ mu - L) <= 1e-8 * max(np.linalg.norm(L), 1e-300)
        except RuntimeError:
            ok = False
        if not ok:
            mu, *_ = np.linalg.lstsq(self.B.toarray(), L, rcond=1e-12)
            if not np.all(np.isfinite(mu)):
                raise SingularSystem("vertical projection system could not be solved")
        return np.asarray(mu)


def vertical_system(c: DiscreteCurve, p: ElasticParams) -> VerticalSystem:
    T = vertical_operator(c, p)
    W = sp.diags(np.repeat(c.weights, p.dim))
    B = (T.T @ W @ T).tocsc()
    return VerticalSystem(T, B, c.weights, p.dim, c.closed)


def vertical_project_lift(c: DiscreteCurve, dq, p: ElasticParams, system: VerticalSystem | None = None) -> CircleField:
    """mu with c' mu the G-orthogonal projection of the field whose lifted differential is dq."""
    system = system or vertical_system(c, p)
    return CircleField(c.grid, system.expand(system.solve(system.rhs(dq))))


def vertical_project(c: DiscreteCurve, h, p: ElasticParams) -> CircleField:
    """Vertical part of a vector field h along c, as the coefficient field mu."""
    return vertical_project_lift(c, r_differential(c, h, p), p)


def vertical_field(c: DiscreteCurve, mu) -> np.ndarray:
    """The vector field c' mu along c."""
    mu = mu.values if isinstance(mu, CircleField) else np.asarray(mu)
    return c.velocity * mu[:, None]


# --- energy and gradient --------------------------------------------------------------------


def _curve_on_grid(spline, grid, reg_factor=1e-8):
    return DiscreteCurve(spline(grid), grid, CLOSED, reg_factor)


@dataclass(frozen=True, eq=False)
class Evaluation:
    """Distance from c to d o psi on psi's grid with the Log solution."""

    psi: CircleDiffeo
    c: DiscreteCurve
    target: DiscreteCurve
    log: LogResult

    @property
    def distance(self) -> float:
        return self.log.distance

    @property
    def energy(self) -> float:
        return 0.5 * self.distance**2


class MatchingProblem:
    """Template c and target d, both held as periodic splines in their parameters."""

    def __init__(self, c: DiscreteCurve, d: DiscreteCurve, p: ElasticParams, N=25, eps_bvp_rel=1e-6, max_iter=500):
        if c.topology != CLOSED or d.topology != CLOSED:
            raise TopologyError("shape matching needs closed curves")
        self.c0, self.d0 = c, d
        self.cs, self.ds = periodic_spline(c), periodic_spline(d)
        self.p, self.N = p, N
        self.eps_bvp_rel, self.max_iter = eps_bvp_rel, max_iter

    def template(self, grid) -> DiscreteCurve:
        if len(grid) == len(self.c0.grid) and np.array_equal(grid, self.c0.grid):
            return self.c0
        return _curve_on_grid(self.cs, grid)

    def target(self, psi: CircleDiffeo) -> DiscreteCurve:
        return DiscreteCurve(self.ds(psi.values), psi.grid, CLOSED)

    def evaluate(self, psi: CircleDiffeo, p_init=None) -> Evaluation:
        c = self.template(psi.grid)
        e = self.target(psi)
        q0 = project_to_constraint(r_transform(c, self.p))
        q1 = project_to_constraint(r_transform(e, self.p))
        eps = self.eps_bvp_rel * q1.norm()
        res = log_shooting(q0, q1, self.N, eps_bvp=eps, max_iter=self.max_iter, p_init=p_init, raise_on_failure=False)
        if not res.converged:
            log.info("Log stopped at residual %.3e (target %.3e)", res.residuals[-1], eps)
        return Evaluation(psi, c, e, res)

    def gradient(self, ev: Evaluation, system: VerticalSystem | None = None) -> CircleField:
        system = system or vertical_system(ev.c, self.p)
        return vertical_project_lift(ev.c, ev.log.p, self.p, system)


def transfer_field(values, old_grid, new_grid):
    """Periodic linear interpolation of a node-wise field to another grid."""
    values = np.asarray(values)
    if len(old_grid) == len(new_grid) and np.array_equal(old_grid, new_grid):
        return values
    x = np.append(old_grid, old_grid[0] + TWO_PI)
    y = np.vstack([values, values[:1]])
    t = old_grid[0] + np.mod(np.asarray(new_grid) - old_grid[0], TWO_PI)
    return np.column_stack([np.interp(t, x, y[:, i]) for i in range(values.shape[1])])


def reparam_gradient(c: DiscreteCurve, d: DiscreteCurve, psi: CircleDiffeo, p: ElasticParams, N=25, **kw) -> CircleField:
    """Right-trivialized gradient mu of E(psi) = dist(c, d o psi)^2 / 2.

    d/de E(psi o Fl(nu, e)) at e = 0 equals G_c(c' mu, c' nu); descent flows
    along -mu. With psi the inverse of the matching map phi this is -grad_phi E.
    """
    prob = MatchingProblem(c, d, p, N, **kw)
    return prob.gradient(prob.evaluate(psi))


# --- descent -----------------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MatchResult:
    psi: CircleDiffeo
    distance_history: list
    path: GeodesicPath | None
    refinement_log: list
    initial_distance: float
    final_distance: float
    iterations: int
    converged: bool
    incomplete: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.psi.grid

    def max_image_gap(self) -> float:
        return float(self.psi.gaps().max())


def solve_bvp_shapes(
    c: DiscreteCurve,
    d: DiscreteCurve,
    p: ElasticParams,
    N: int = 25,
    alpha0: float = 0.1,
    tol_rel: float = 1e-4,
    max_outer: int = 100,
    refine: bool = True,
    cap: int = 8,
    eps_bvp_rel: float = 1e-6,
    max_iter: int = 500,
    max_halvings: int = 20,
    cap_patience: int = 3,
    raise_on_incomplete: bool = False,
) -> MatchResult:
    """Gradient descent on psi with adaptive step size and optional grid refinement.

    Each iteration: Log at the current psi, vertical projection, flow along -mu
    for time alpha, compose, and accept when the distance decreases (alpha grows
    by 1.5), otherwise halve alpha. Stops when the relative decrease falls below
    tol_rel or after max_outer iterations.
    """
    t0 = time.perf_counter()
    prob = MatchingProblem(c, d, p, N, eps_bvp_rel, max_iter)
    n0 = len(c)
    psi = CircleDiffeo.identity(c.grid)
    ev = prob.evaluate(psi)
    d_init = ev.distance
    history = [d_init]
    refinement_log = []
    alpha = alpha0
    capped_streak = 0
    incomplete = False
    converged = False
    it = 0
    evaluations = 1
    for it in range(1, max_outer + 1):
        if history[-1] == 0.0:
            converged = True
            break
        mu = prob.gradient(ev)
        accepted = None
        for _ in range(max_halvings):
            try:
                cand = compose(psi, flow(-mu, alpha))
                recs = []
                if refine:
                    cand, recs = refine_until_fixed(cand, n0, cap)
                cev = prob.evaluate(cand, p_init=transfer_field(ev.log.p, psi.grid, cand.grid))
                evaluations += 1
            except (MonotonicityLost, ConeViolation, NewtonDivergence, NoConvergence) as exc:
                log.debug("rejected step alpha=%.3g: %s", alpha, exc)
                alpha *= 0.5
                continue
            if cev.distance < ev.distance:
                accepted = cev
                break
            alpha *= 0.5
        if accepted is None:
            converged = True
            break
        rel = (ev.distance - accepted.distance) / ev.distance
        history.append(accepted.distance)
        if recs:
            refinement_log.append(
                {
                    "iteration": it,
                    "inserted": sum(len(r.inserted) for r in recs),
                    "removed": sum(len(r.removed) for r in recs),
                    "nodes": len(accepted.psi),
                    "capped": any(r.capped for r in recs),
                }
            )
        capped_streak = capped_streak + 1 if any(r.capped for r in recs) else 0
        psi, ev = accepted.psi, accepted
        alpha *= 1.5
        if capped_streak >= cap_patience:
            incomplete = True
            log.warning("refinement pressure persists at the node cap: point collapse suspected")
            break
        if rel < tol_rel:
            converged = True
            break

    result = MatchResult(
        psi=psi,
        distance_history=history,
        path=ev.log.path,
        refinement_log=refinement_log,
        initial_distance=d_init,
        final_distance=ev.distance,
        iterations=it,
        converged=converged,
        incomplete=incomplete,
        diagnostics={"evaluations": evaluations, "seconds": time.perf_counter() - t0, "final_alpha": alpha, "nodes": len(psi)},
    )
    if incomplete and raise_on_incomplete:
        raise IncompletenessDetected("matching could not resolve the reparameterization within the node cap", result)
    return result
