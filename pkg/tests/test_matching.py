import numpy as np
import pytest

from elastica import synth
from elastica.curves import CLOSED, DiscreteCurve, ElasticParams
from elastica.diffeo import CircleDiffeo, CircleField, compose, flow
from elastica.errors import IncompletenessDetected, TopologyError
from elastica.matching import (
    MatchingProblem,
    reparam_gradient,
    solve_bvp_shapes,
    transfer_field,
    vertical_field,
    vertical_operator,
    vertical_project,
    vertical_system,
)
from elastica.transforms import elastic_metric, r_differential

SRVT = ElasticParams(1.0, 0.5)


def test_operator_matches_differential(params):
    c = synth.star(96, arms=3, amp=0.2)
    mu = np.cos(2 * c.grid) + 0.3
    T = vertical_operator(c, params)
    assert np.allclose(T @ mu, r_differential(c, vertical_field(c, mu), params).ravel(), atol=1e-12)


def test_vertical_fields_are_fixed(params):
    c = synth.ellipse(96)
    mu = 0.2 + np.sin(3 * c.grid)
    out = vertical_project(c, vertical_field(c, mu), params)
    assert np.abs(out.values - mu).max() < 1e-10


def test_projection_is_orthogonal(params, rng):
    c = synth.star(96, arms=3, amp=0.2)
    h = rng.normal(size=(96, 2)).cumsum(axis=0) * 0.05
    h -= np.linspace(0, 1, 96)[:, None] * h[-1]
    ver = vertical_field(c, vertical_project(c, h, params))
    hor = h - ver
    assert abs(elastic_metric(c, hor, ver, params)) < 1e-10 * elastic_metric(c, h, h, params)
    G = elastic_metric(c, h, h, params)
    assert elastic_metric(c, hor, hor, params) + elastic_metric(c, ver, ver, params) == pytest.approx(G, rel=1e-12)


def test_inner_is_metric_of_vertical_fields():
    c = synth.ellipse(64)
    system = vertical_system(c, SRVT)
    mu, nu = np.cos(c.grid), np.sin(2 * c.grid)
    assert system.inner(mu, nu) == pytest.approx(elastic_metric(c, vertical_field(c, mu), vertical_field(c, nu), SRVT), rel=1e-12)


def test_open_curves_pin_the_ends():
    c = synth.arc(50)
    system = vertical_system(c, SRVT)
    assert system.T.shape[1] == 48
    mu = vertical_project(c, np.column_stack([np.sin(c.grid), np.cos(c.grid)]), SRVT)
    assert mu.values[0] == 0 and mu.values[-1] == 0


def test_transfer_field_identity_and_interpolation():
    g0 = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    v = np.column_stack([np.cos(g0), np.sin(g0)])
    assert transfer_field(v, g0, g0) is v
    g1 = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    assert np.allclose(transfer_field(v, g0, g1)[::2], v)


def test_gradient_matches_difference_quotient(rng):
    c, d = synth.ellipse(96), synth.star(96, arms=3, amp=0.2)
    prob = MatchingProblem(c, d, SRVT, 25, eps_bvp_rel=1e-10)
    psi = CircleDiffeo.identity(c.grid)
    ev = prob.evaluate(psi)
    system = vertical_system(ev.c, SRVT)
    mu = prob.gradient(ev, system)
    nu = CircleField(c.grid, np.sin(c.grid + 0.4) + 0.5 * np.cos(2 * c.grid))
    eps = 1e-4
    ep = prob.evaluate(compose(psi, flow(nu, eps)), ev.log.p).energy
    em = prob.evaluate(compose(psi, flow(nu, -eps)), ev.log.p).energy
    scale = np.sqrt(system.inner(mu.values, mu.values) * system.inner(nu.values, nu.values))
    assert abs((ep - em) / (2 * eps) - system.inner(mu.values, nu.values)) <= 1e-2 * scale
    same = reparam_gradient(c, d, psi, SRVT, eps_bvp_rel=1e-10)
    assert np.allclose(same.values, mu.values)


def test_descent_recovers_reparameterization():
    c = synth.ellipse(80)
    d = DiscreteCurve.from_function(lambda t: np.column_stack([2 * np.cos(t + 0.3 * np.sin(t)), np.sin(t + 0.3 * np.sin(t))]), 80)
    r = solve_bvp_shapes(c, d, SRVT, 25, refine=False)
    assert r.final_distance < r.initial_distance / 100
    assert np.all(np.diff(r.distance_history) <= 0)
    assert r.converged and not r.incomplete


def test_descent_requires_closed_curves():
    with pytest.raises(TopologyError):
        solve_bvp_shapes(synth.segment(64), synth.segment(64), SRVT)


def test_identical_shapes_stop_immediately():
    c = synth.ellipse(64)
    r = solve_bvp_shapes(c, c, SRVT)
    assert r.final_distance == pytest.approx(0.0, abs=1e-9)


def test_incompleteness_is_flagged_at_the_node_cap():
    c, d = synth.ellipse(200), synth.ellipse_fold(200)
    r = solve_bvp_shapes(c, d, SRVT, cap=1)
    assert r.incomplete and len(r.psi) <= 200
    assert r.final_distance < r.initial_distance
    with pytest.raises(IncompletenessDetected) as info:
        solve_bvp_shapes(c, d, SRVT, cap=1, raise_on_incomplete=True)
    assert info.value.result.incomplete
