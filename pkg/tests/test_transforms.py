import numpy as np
import pytest

from elastica import synth
from elastica.curves import CLOSED, OPEN, DiscreteCurve, ElasticParams
from elastica.errors import ConeViolation, TopologyError
from elastica.selftest import FourierCurve, random_field
from elastica.transforms import (
    LiftedCurve,
    closure_defect,
    elastic_metric,
    pullback_metric,
    q_differential,
    q_metric,
    q_transform,
    r_differential,
    r_inverse,
    r_transform,
    srvt_metric_explicit,
    younes_differential,
    younes_transform,
)


def test_lift_lies_on_cone(params, rng):
    c = FourierCurve(rng).curve(64)
    q = r_transform(c, params)
    assert q.values.shape[1] == params.dim
    bad = q.values.copy()
    if params.planar:
        bad[3] = 0.0
    else:
        bad[3, 2] *= 2.0
    with pytest.raises(ConeViolation):
        LiftedCurve(bad, q.grid, params)


def test_differential_matches_differences(params, rng):
    c = FourierCurve(rng).curve(200)
    h = random_field(rng, c.grid)
    eps = 1e-6
    fd = (r_transform(c.with_points(c.points + eps * h), params).values - r_transform(c.with_points(c.points - eps * h), params).values) / (2 * eps)
    an = r_differential(c, h, params)
    assert np.abs(fd - an).max() <= 1e-6 * np.abs(an).max()


def test_pullback_identity_is_exact(params, rng):
    c = FourierCurve(rng).curve(128)
    h, k = random_field(rng, c.grid), random_field(rng, c.grid)
    G = elastic_metric(c, h, k, params)
    flat = pullback_metric(c, r_differential(c, h, params), r_differential(c, k, params))
    assert G == pytest.approx(flat, rel=1e-12, abs=1e-14)


def test_srvt_metric_explicit_form(rng):
    c = FourierCurve(rng).curve(128)
    h, k = random_field(rng, c.grid), random_field(rng, c.grid)
    assert srvt_metric_explicit(c, h, k) == pytest.approx(elastic_metric(c, h, k, ElasticParams(1, 0.5)), rel=1e-12)


def test_open_inverse_round_trip(params, rng):
    c = FourierCurve(rng, OPEN, amp=0.3).curve(150)
    back = r_inverse(r_transform(c, params), c.points[0])
    assert np.abs(back.points - c.points).max() < 1e-10


def test_closed_inverse_and_defect(params):
    c = synth.ellipse(400)
    q = r_transform(c, params)
    assert np.abs(closure_defect(q)).max() < 1e-10
    back = r_inverse(q, c.points[0])
    assert np.abs(back.points - c.points).max() < 1e-3


def test_translation_and_scaling(params, rng):
    c = FourierCurve(rng).curve(100)
    q = r_transform(c, params).values
    assert np.allclose(r_transform(c.translate([5.0, -2.0]), params).values, q, atol=1e-12)
    assert np.allclose(r_transform(c.with_points(9.0 * c.points), params).values, 3.0 * q, atol=1e-12)
    # the Q transform sees position, so it is not translation invariant
    assert not np.allclose(q_transform(c.translate([5.0, -2.0])), q_transform(c))


def test_q_metric_is_pullback(rng):
    c = FourierCurve(rng).curve(128)
    h, k = random_field(rng, c.grid), random_field(rng, c.grid)
    assert q_metric(c, h, k) == pytest.approx(pullback_metric(c, q_differential(c, h), q_differential(c, k)), rel=1e-12)


def test_younes_open_only_and_pullback(rng):
    with pytest.raises(TopologyError):
        younes_transform(synth.circle(32))
    c = FourierCurve(rng, OPEN, amp=0.2).curve(128)
    h = random_field(rng, c.grid)
    eps = 1e-6
    fd = (younes_transform(c.with_points(c.points + eps * h)) - younes_transform(c.with_points(c.points - eps * h))) / (2 * eps)
    assert np.abs(fd - younes_differential(c, h)).max() < 1e-6
    assert np.allclose(younes_transform(c.translate([1.0, 1.0])), younes_transform(c))
