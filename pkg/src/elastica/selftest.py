"""Self-contained acceptance checks with a JSON report.

Each check returns a CheckResult; ``run_all`` executes the suite. The quick
mode runs the cheaper checks at reduced sizes.
"""

from __future__ import annotations

import functools
import inspect
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import synth
from .closed_space import exp_rattle, log_shooting, param_distance, project_to_constraint, proj
from .curvature import oneill_term, sectional_curvature_preshape
from .curves import CLOSED, OPEN, DiscreteCurve, ElasticParams, curvature, first_variations, frame
from .diffeo import CircleDiffeo, CircleField, compose, flow
from .matching import MatchingProblem, solve_bvp_shapes, vertical_system
from .open_space import (
    chart_distance,
    explicit_exp,
    geodesic_equation_residual,
    open_distance,
)
from .transforms import elastic_metric, q_metric, r_transform, younes_transform

PARAMS = (ElasticParams(1.0, 0.5), ElasticParams(1.0, 1.0), ElasticParams(2.0, 1.5))


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    seconds: float = 0.0
    detail: dict = field(default_factory=dict)

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag} {self.name}: value={self.value:.3e} tol={self.tolerance:.1e} ({self.seconds:.1f}s)"


# --- random smooth test objects ---------------------------------------------------------------


class FourierCurve:
    """Closed or open curve given by a few Fourier modes, with analytic derivative."""

    def __init__(self, rng, topology=CLOSED, modes=4, amp=0.15, rx=1.5, ry=1.0):
        self.topology = topology
        self.k = np.arange(2, modes + 2)
        self.A = rng.normal(size=(2, modes)) * amp / self.k
        self.B = rng.normal(size=(2, modes)) * amp / self.k
        self.rx, self.ry = rx, ry

    def __call__(self, t, order=0):
        t = np.asarray(t, dtype=float)
        if self.topology == CLOSED:
            base = [np.array([self.rx * np.cos(t), self.ry * np.sin(t)]), np.array([-self.rx * np.sin(t), self.ry * np.cos(t)])][order]
        else:
            base = [np.array([t, 0 * t]), np.array([1 + 0 * t, 0 * t])][order]
        out = base.copy()
        for i, k in enumerate(self.k):
            if order == 0:
                out += np.outer(self.A[:, i], np.cos(k * t)) + np.outer(self.B[:, i], np.sin(k * t))
            else:
                out += k * (-np.outer(self.A[:, i], np.sin(k * t)) + np.outer(self.B[:, i], np.cos(k * t)))
        return out.T

    def curve(self, n):
        return DiscreteCurve.from_function(self, n, self.topology)


def random_field(rng, grid, dim=2, modes=4, amp=1.0):
    cols = []
    for _ in range(dim):
        a = rng.normal(size=modes) * amp
        ph = rng.uniform(0, 2 * np.pi, size=modes)
        cols.append(sum(a[k] * np.cos((k + 1) * grid + ph[k]) / (k + 1) for k in range(modes)))
    return np.column_stack(cols)


def _timed(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kw):
        t0 = time.perf_counter()
        res = fn(*args, **kw)
        res.seconds = time.perf_counter() - t0
        return res

    return wrapper


# --- the checks ----------------------------------------------------------------------------------


@_timed
def check_variations(seed=0, n=256, pairs=20, eps=1e-5):
    """First variations of v, n, |c'| and curvature against central differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        c = FourierCurve(rng).curve(n)
        h = random_field(rng, c.grid, amp=0.5)
        var = first_variations(c, h)
        cp, cm = c.with_points(c.points + eps * h), c.with_points(c.points - eps * h)
        fp, fm = frame(cp), frame(cm)
        fd = {
            "v": (fp.v - fm.v) / (2 * eps),
            "n": (fp.n - fm.n) / (2 * eps),
            "speed": (fp.speed - fm.speed) / (2 * eps),
            "kappa": (curvature(cp) - curvature(cm)) / (2 * eps),
        }
        an = {"v": var.Dv, "n": var.Dn, "speed": var.Dspeed, "kappa": var.Dkappa}
        for key in fd:
            worst = max(worst, np.abs(fd[key] - an[key]).max() / np.abs(an[key]).max())
    return CheckResult("variations", worst <= 1e-5, worst, 1e-5)


def _continuum_metric(fc: FourierCurve, hc, p, m=4096):
    """G^{a,b}(h, h) from analytic derivatives on a fine periodic grid."""
    t = np.arange(m) * 2 * np.pi / m
    cp = fc(t, 1)
    hp = hc(t)
    sp_ = np.linalg.norm(cp, axis=1)
    v = cp / sp_[:, None]
    nrm = np.column_stack([-v[:, 1], v[:, 0]])
    hn = np.einsum("ij,ij->i", hp, nrm)
    hv = np.einsum("ij,ij->i", hp, v)
    return float(np.sum((p.a**2 * hn**2 + p.b**2 * hv**2) / sp_) * 2 * np.pi / m)


@_timed
def check_pullback(seed=0, n=512, pairs=10, eps=1e-6):
    """elastic_metric against the L2 norm of finite differences of the transform, plus order of accuracy."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    ratios = []
    for p in PARAMS:
        for _ in range(pairs):
            fc = FourierCurve(rng)
            c = fc.curve(n)
            a = rng.normal(size=(2, 3))
            ph = rng.uniform(0, 2 * np.pi, size=(2, 3))

            def h_of(t, d=0, a=a, ph=ph):
                k = np.arange(1, 4)
                if d == 0:
                    return np.column_stack([np.cos(np.outer(t, k) + ph[i]) @ a[i] for i in range(2)])
                return np.column_stack([(-np.sin(np.outer(t, k) + ph[i]) * k) @ a[i] for i in range(2)])

            h = h_of(c.grid)
            G = elastic_metric(c, h, h, p)
            dq = (r_transform(c.with_points(c.points + eps * h), p).values - r_transform(c.with_points(c.points - eps * h), p).values) / (2 * eps)
            flat = float(np.sum(c.weights * np.einsum("ij,ij->i", dq, dq)))
            worst = max(worst, abs(G - flat) / G)
        # order of accuracy against the continuum value on the last pair
        exact = _continuum_metric(fc, lambda t: h_of(t, 1), p)
        errs = []
        for m in (n // 4, n // 2):
            cm = fc.curve(m)
            hm = h_of(cm.grid)
            errs.append(abs(elastic_metric(cm, hm, hm, p) - exact))
        ratios.append(errs[0] / max(errs[1], 1e-300))
    ok = worst <= 1e-3 and min(ratios) >= 3.0
    return CheckResult("pullback", ok, worst, 1e-3, detail={"refinement_ratios": ratios})


@_timed
def check_flatness(seed=0, n=257, pairs=10):
    """open_distance versus the chart distance, and the analytic segment pair."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in PARAMS:
        for _ in range(pairs):
            c0 = FourierCurve(rng, OPEN, amp=0.3).curve(n)
            c1 = FourierCurve(rng, OPEN, amp=0.3).curve(n)
            worst = max(worst, abs(open_distance(c0, c1, p) - chart_distance(c0, c1, p)))
    s0 = synth.segment(n)
    s1 = DiscreteCurve.from_function(lambda t: np.column_stack([2 * t, 0 * t]), n, OPEN)
    analytic = abs(open_distance(s0, s1, ElasticParams(1, 0.5)) - math.sqrt(2 * math.pi) * (math.sqrt(2) - 1))
    ok = worst <= 1e-10 and analytic <= 1e-8
    return CheckResult("flatness", ok, worst, 1e-10, detail={"segment_error": analytic})


@_timed
def check_geodesic_equation(seed=0, n=512, samples=64):
    """Residual of (A_c c_t)_t + B_c(c_t, c_t)/2 along explicit solutions."""
    rng = np.random.default_rng(seed)
    worst, coarse_vs_fine = 0.0, []
    for p in PARAMS:
        c = FourierCurve(rng, OPEN, amp=0.2).curve(n)
        u = random_field(rng, c.grid, amp=0.2)
        res = []
        for T in (samples, 2 * samples):
            ts = np.linspace(0.0, 1.0, T)
            curves = [explicit_exp(c, u, t, p) for t in ts]
            r, _ = geodesic_equation_residual(curves, ts[1] - ts[0], p)
            res.append(float(np.abs(r[2:-2, 2:-2]).max()))
        worst = max(worst, res[0])
        coarse_vs_fine.append(res)
    decreasing = all(a > b for a, b in coarse_vs_fine)
    return CheckResult("geodesic_equation", worst <= 1e-3 and decreasing, worst, 1e-3, detail={"residuals": coarse_vs_fine})


@_timed
def check_rattle(seed=0, n=300, N=25, shots=5, rel_size=0.2, tol_F=1e-10):
    """Constraint drift, energy drift and time reversal of RATTLE from the circle lift."""
    rng = np.random.default_rng(seed)
    p = ElasticParams(1, 0.5)
    q = r_transform(synth.circle(n), p)
    qn = q.norm()
    F = E = back = 0.0
    for _ in range(shots):
        v = proj(q, random_field(rng, q.grid, modes=6))
        v *= rel_size * qn / math.sqrt(float(np.sum(q.weights * np.einsum("ij,ij->i", v, v))))
        path = exp_rattle(q, v, N, tol_F=tol_F)
        en = np.asarray(path.diagnostics["energy"])
        F = max(F, max(path.diagnostics["F"]))
        E = max(E, float(np.ptp(en) / en[0]))
        rev = exp_rattle(path.end, -path.momenta[-1], N, tol_F=tol_F)
        back = max(back, float(np.abs(rev.end.values - q.values).max()))
    ok = F <= 1e-8 and E <= 1e-6 and back <= 1e-8
    return CheckResult("rattle", ok, E, 1e-6, detail={"max_F": F, "energy_drift": E, "reversal": back})


@_timed
def check_log_roundtrip(n=300, N=25):
    """Log then Exp between the ellipse and the folded ellipse."""
    p = ElasticParams(1, 0.5)
    q0 = project_to_constraint(r_transform(synth.ellipse(n), p))
    q1 = project_to_constraint(r_transform(synth.ellipse_fold(n), p))
    t0 = time.perf_counter()
    res = log_shooting(q0, q1, N)
    secs = time.perf_counter() - t0
    end = exp_rattle(q0, res.p, N).end
    d = end.values - q1.values
    err = math.sqrt(float(np.sum(q1.weights * np.einsum("ij,ij->i", d, d)))) / q1.norm()
    ok = err <= 1e-3 and res.iterations <= 500 and secs <= 20.0
    return CheckResult("log_roundtrip", ok, err, 1e-3, detail={"iterations": res.iterations, "seconds": secs})


SYMMETRY_PAIRS = (("ellipse", "ellipse_fold"), ("circle", "star"), ("ellipse", "star"), ("circle", "ellipse_fold"))


@_timed
def check_symmetry(n=200, N=25, eps_rel=1e-5):
    """Distances computed in both directions agree."""
    p = ElasticParams(1, 0.5)
    worst, rows = 0.0, []
    for a, b in SYMMETRY_PAIRS:
        ca, cb = synth.make(a, n), synth.make(b, n)
        dab, _ = param_distance(ca, cb, p, N, eps_bvp=None if eps_rel is None else eps_rel * r_transform(cb, p).norm())
        dba, _ = param_distance(cb, ca, p, N, eps_bvp=None if eps_rel is None else eps_rel * r_transform(ca, p).norm())
        rel = abs(dab - dba) / max(dab, dba)
        rows.append((a, b, dab, dba))
        worst = max(worst, rel)
    return CheckResult("symmetry", worst <= 1e-3, worst, 1e-3, detail={"pairs": rows})


@_timed
def check_gradient(seed=0, n=128, directions=8, eps=1e-4):
    """Reparameterization gradient against central differences of the energy."""
    rng = np.random.default_rng(seed)
    p = ElasticParams(1, 0.5)
    c, d = synth.ellipse(n), synth.star(n, arms=3, amp=0.2)
    prob = MatchingProblem(c, d, p, 25, eps_bvp_rel=1e-10)
    psi = CircleDiffeo.identity(c.grid)
    ev = prob.evaluate(psi)
    system = vertical_system(ev.c, p)
    mu = prob.gradient(ev, system)
    gnorm = math.sqrt(system.inner(mu.values, mu.values))
    worst = 0.0
    for _ in range(directions):
        nu = CircleField(c.grid, random_field(rng, c.grid, dim=1, modes=3)[:, 0])
        ep = prob.evaluate(compose(psi, flow(nu, eps)), p_init=ev.log.p).energy
        em = prob.evaluate(compose(psi, flow(nu, -eps)), p_init=ev.log.p).energy
        fd = (ep - em) / (2 * eps)
        an = system.inner(mu.values, nu.values)
        scale = gnorm * math.sqrt(system.inner(nu.values, nu.values))
        worst = max(worst, abs(fd - an) / scale)
    return CheckResult("gradient", worst <= 1e-2, worst, 1e-2)


@_timed
def check_matching(n_phi=100, n_fold=200):
    """Descent recovers a known reparameterization and improves on the fold pair."""
    p = ElasticParams(1, 0.5)
    c = synth.ellipse(n_phi)

    def warped(t):
        s = t + 0.4 * np.sin(t)
        return np.column_stack([2 * np.cos(s), np.sin(s)])

    d = DiscreteCurve.from_function(warped, n_phi)
    r = solve_bvp_shapes(c, d, p, 25, refine=False)
    factor = r.initial_distance / max(r.final_distance, 1e-300)
    mono = bool(np.all(np.diff(r.distance_history) <= 0))
    f = solve_bvp_shapes(synth.ellipse(n_fold), synth.ellipse_fold(n_fold), p, 25, refine=True)
    mono_f = bool(np.all(np.diff(f.distance_history) <= 0))
    ok = factor >= 100 and mono and mono_f and f.final_distance < f.initial_distance
    return CheckResult(
        "matching",
        ok,
        factor,
        100.0,
        detail={"fold_initial": f.initial_distance, "fold_final": f.final_distance, "monotone": [mono, mono_f]},
    )


@_timed
def check_refinement(n0=200):
    """Image gaps of psi with and without adaptive refinement on the fold pair."""
    p = ElasticParams(1, 0.5)
    c, d = synth.ellipse(n0), synth.ellipse_fold(n0)
    h0 = 2 * np.pi / n0
    on = solve_bvp_shapes(c, d, p, 25, refine=True)
    off = solve_bvp_shapes(c, d, p, 25, refine=False)
    g_on, g_off = on.max_image_gap() / h0, off.max_image_gap() / h0
    ok = g_on <= 1 + 1e-9 and g_off > 2
    return CheckResult("refinement", ok, g_on, 1.0, detail={"gap_refined": g_on, "gap_unrefined": g_off, "nodes": len(on.psi)})


@_timed
def check_curvature_signs(seed=0, n=128, pairs=5):
    """O'Neill correction is nonnegative; the open cone-curve space is flat."""
    rng = np.random.default_rng(seed)
    p = ElasticParams(1, 0.5)
    c = synth.ellipse(n)
    least = math.inf
    for _ in range(pairs):
        X, Y = random_field(rng, c.grid), random_field(rng, c.grid)
        least = min(least, oneill_term(c, X, Y, p))
    flat = 0.0
    for pp in PARAMS[1:]:
        q = r_transform(FourierCurve(rng, OPEN, amp=0.2).curve(256), pp)
        flat = max(flat, abs(sectional_curvature_preshape(q, random_field(rng, q.grid, 3), random_field(rng, q.grid, 3))))
    ok = least >= 0 and flat <= 1e-4
    return CheckResult("curvature_signs", ok, flat, 1e-4, detail={"min_oneill": least})


@_timed
def check_invariance(seed=0, n=512):
    """Reparameterization, translation and scaling properties of the transforms."""
    rng = np.random.default_rng(seed)
    fc = FourierCurve(rng)
    a = rng.normal(size=(2, 3))

    def h_of(t):
        return np.column_stack([np.cos(np.outer(t, [1, 2, 3])) @ a[0], np.sin(np.outer(t, [1, 2, 3])) @ a[1]])

    def phi(t):
        return t + 0.3 * np.sin(t)

    c = fc.curve(n)
    h = h_of(c.grid)
    cphi = DiscreteCurve.from_function(lambda t: fc(phi(t)), n)
    hphi = h_of(phi(c.grid))
    reparam = 0.0
    for p in PARAMS:
        g0, g1 = elastic_metric(c, h, h, p), elastic_metric(cphi, hphi, hphi, p)
        reparam = max(reparam, abs(g0 - g1) / g0)
    qm0, qm1 = q_metric(c, h, h), q_metric(cphi, hphi, hphi)
    reparam = max(reparam, abs(qm0 - qm1) / qm0)
    shift = np.array([3.0, -1.0])
    trans = 0.0
    for p in PARAMS:
        trans = max(trans, np.abs(r_transform(c.translate(shift), p).values - r_transform(c, p).values).max())
    co = FourierCurve(rng, OPEN).curve(n)
    trans = max(trans, np.abs(younes_transform(co.translate(shift)) - younes_transform(co)).max())
    scale = 0.0
    for p in PARAMS:
        scale = max(scale, np.abs(r_transform(c.with_points(4 * c.points), p).values - 2 * r_transform(c, p).values).max())
    ok = reparam <= 1e-3 and trans <= 1e-12 and scale <= 1e-12
    return CheckResult("invariance", ok, reparam, 1e-3, detail={"translation": trans, "scaling": scale})


FULL = (
    check_variations,
    check_pullback,
    check_flatness,
    check_geodesic_equation,
    check_rattle,
    check_log_roundtrip,
    check_symmetry,
    check_gradient,
    check_matching,
    check_refinement,
    check_curvature_signs,
    check_invariance,
)


def quick_suite():
    """Cheap subset, n = 64 except where a coarser grid defeats the check."""
    return (
        lambda: check_variations(n=64, pairs=5),
        lambda: check_pullback(n=128, pairs=2),
        lambda: check_flatness(n=65, pairs=3),
        lambda: check_rattle(n=64, shots=2),
        lambda: check_log_roundtrip(n=64),
        lambda: check_invariance(n=256),
    )


BUDGET_SECONDS = 300.0


def run_all(quick=False, seed=0, tol_F=None, progress=None):
    """Run the suite; crashes count as failures and the full run must fit the time budget."""
    results = []
    t0 = time.perf_counter()
    if quick:
        checks = quick_suite()
    else:
        checks = [functools.partial(f, seed=seed) if "seed" in inspect.signature(f).parameters else f for f in FULL]
        if tol_F is not None:
            checks[FULL.index(check_rattle)] = functools.partial(check_rattle, seed=seed, tol_F=tol_F)
    for chk in checks:
        try:
            res = chk()
        except Exception as exc:  # a crash is a failed check, reported not raised
            name = getattr(getattr(chk, "func", chk), "__name__", "check").removeprefix("check_")
            res = CheckResult(name, False, math.nan, math.nan, detail={"error": repr(exc)})
        results.append(res)
        if progress:
            progress(res)
    total = time.perf_counter() - t0
    in_budget = quick or total < BUDGET_SECONDS
    return {
        "passed": all(r.passed for r in results) and in_budget,
        "seconds": total,
        "budget_seconds": None if quick else BUDGET_SECONDS,
        "quick": quick,
        "checks": [asdict(r) for r in results],
    }
