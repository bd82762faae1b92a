import math

import numpy as np
import pytest

from elastica import synth
from elastica.closed_space import (
    constraint,
    cone_tangent_project,
    exp_rattle,
    log_shooting,
    normal_basis,
    param_distance,
    project_to_constraint,
    proj,
    tangency_residual,
    slot_corrected_normal_fields,
)
from elastica.curves import ElasticParams
from elastica.errors import NoConvergence, TopologyError
from elastica.selftest import FourierCurve, random_field
from elastica.transforms import r_transform

from conftest import wrms

SRVT = ElasticParams(1.0, 0.5)


def _shot(q, rng, size=0.2, modes=5):
    v = proj(q, random_field(rng, q.grid, dim=q.params.dim, modes=modes))
    return v * size * q.norm() / wrms(v, q.weights)


def test_constraint_vanishes_on_closed_lifts(params):
    q = r_transform(synth.ellipse(256), params)
    assert np.abs(constraint(q)).max() < 1e-10


def test_constraint_gradient_matches_differences(params, rng):
    q = project_to_constraint(r_transform(FourierCurve(rng).curve(128), params))
    nb = normal_basis(q)
    h = cone_tangent_project(q.values, rng.normal(size=q.values.shape), params)
    eps = 1e-6
    # move along the cone via the chart so the perturbed lift stays admissible
    from elastica.closed_space import _ChartState

    st = _ChartState.from_lift(q)
    dx = st.to_chart(h)
    Fp = st.moved(eps * dx).F()
    Fm = st.moved(-eps * dx).F()
    fd = (Fp - Fm) / (2 * eps)
    w = q.weights
    an = [np.sum(w * np.einsum("ij,ij->i", nb.U1, h)), np.sum(w * np.einsum("ij,ij->i", nb.U2, h))]
    assert np.allclose(fd, an, rtol=1e-5, atol=1e-8)


def test_normal_basis_is_orthonormal_and_tangent(params):
    q = r_transform(synth.star(200, arms=3, amp=0.2), params)
    nb = normal_basis(q)
    assert np.allclose(nb.gram, np.eye(2), atol=1e-12)
    for U in (nb.U1, nb.U2, nb.U1t, nb.U2t):
        assert np.abs(tangency_residual(q.values, U, params)).max() < 1e-10 * np.abs(q.values).max() ** 2


def test_slot_corrected_fields_are_tangent(params):
    q = r_transform(synth.star(200, arms=3, amp=0.2), params)
    for U in slot_corrected_normal_fields(q):
        assert np.abs(tangency_residual(q.values, U, params)).max() < 1e-10


def test_proj_is_idempotent_and_kills_normals(params, rng):
    q = r_transform(synth.ellipse(128), params)
    v = random_field(rng, q.grid, dim=params.dim)
    pv = proj(q, v)
    assert np.allclose(proj(q, pv), pv, atol=1e-12)
    nb = normal_basis(q)
    assert wrms(proj(q, nb.U1), q.weights) < 1e-12


def test_project_to_constraint(params, rng):
    q = r_transform(FourierCurve(rng).curve(128), params)
    bumped = q.with_values(q.values * (1 + 0.05 * np.cos(q.grid))[:, None])
    fixed = project_to_constraint(bumped)
    assert np.abs(constraint(fixed)).max() <= 1e-10


def test_rattle_invariants(params, rng):
    q = project_to_constraint(r_transform(synth.circle(128), params))
    path = exp_rattle(q, _shot(q, rng), 25)
    assert max(path.diagnostics["F"]) <= 1e-9
    e = np.asarray(path.diagnostics["energy"])
    assert np.ptp(e) / e[0] < 1e-5
    back = exp_rattle(path.end, -path.momenta[-1], 25)
    assert np.abs(back.end.values - q.values).max() < 1e-9
    rev = path.reversed()
    assert np.allclose(rev.start.values, path.end.values)
    assert path.length == pytest.approx(math.sqrt(2 * e[0]))


def test_zero_shot_stays_put():
    q = r_transform(synth.ellipse(64), SRVT)
    path = exp_rattle(q, np.zeros_like(q.values), 10)
    assert np.allclose(path.end.values, q.values)
    assert path.length == 0


def test_log_inverts_exp(rng):
    q0 = project_to_constraint(r_transform(synth.circle(128), SRVT))
    p = _shot(q0, rng, 0.3)
    q1 = exp_rattle(q0, p, 25).end
    res = log_shooting(q0, q1, 25, eps_bvp=1e-8 * q1.norm())
    assert res.converged
    assert wrms(res.p - p, q0.weights) < 1e-6 * wrms(p, q0.weights)
    assert res.distance == pytest.approx(wrms(p, q0.weights), rel=1e-6)


def test_log_failure_modes():
    q0 = project_to_constraint(r_transform(synth.ellipse(64), SRVT))
    q1 = project_to_constraint(r_transform(synth.star(64), SRVT))
    with pytest.raises(NoConvergence) as info:
        log_shooting(q0, q1, 25, eps_bvp=1e-14, max_iter=2)
    assert info.value.result is not None
    res = log_shooting(q0, q1, 25, eps_bvp=1e-14, max_iter=2, raise_on_failure=False)
    assert not res.converged and res.iterations <= 2


def test_param_distance_properties():
    c, d = synth.ellipse(128), synth.star(128, arms=3, amp=0.2)
    dist, path = param_distance(c, d, SRVT, 25, eps_bvp=1e-7)
    assert dist > 0
    assert param_distance(c, c, SRVT)[0] == pytest.approx(0.0, abs=1e-9)
    back, _ = param_distance(d, c, SRVT, 25, eps_bvp=1e-7)
    assert back == pytest.approx(dist, rel=1e-5)
    moved, _ = param_distance(c.translate([2.0, 1.0]), d, SRVT, 25, eps_bvp=1e-7)
    assert moved == pytest.approx(dist, rel=1e-9)
    assert len(path.curves()) == 26
    with pytest.raises(TopologyError):
        param_distance(synth.segment(64), synth.segment(64), SRVT)
