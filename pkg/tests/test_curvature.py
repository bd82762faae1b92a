import numpy as np
import pytest

from elastica import synth
from elastica.closed_space import project_to_constraint
from elastica.curvature import (
    cone_normal_part,
    oneill_term,
    second_fundamental_form,
    sectional_curvature_preshape,
    tangent_extension,
)
from elastica.curves import OPEN, ElasticParams
from elastica.errors import DegenerateBasis, TopologyError
from elastica.selftest import FourierCurve, random_field
from elastica.transforms import r_transform

SRVT = ElasticParams(1.0, 0.5)


def _fields(rng, q):
    return random_field(rng, q.grid, q.params.dim), random_field(rng, q.grid, q.params.dim)


def test_second_fundamental_form_is_symmetric(rng):
    q = project_to_constraint(r_transform(synth.circle(128), SRVT))
    h, k = _fields(rng, q)
    X, Y = tangent_extension(q, h), tangent_extension(q, k)
    a = second_fundamental_form(q, X, Y)
    b = second_fundamental_form(q, Y, X)
    assert np.abs(a - b).max() < 1e-6 * max(np.abs(a).max(), 1e-12)


def test_closed_preshape_curvature_is_stable(rng):
    q = project_to_constraint(r_transform(synth.circle(128), SRVT))
    h, k = _fields(rng, q)
    K1 = sectional_curvature_preshape(q, h, k, step=1e-4)
    K2 = sectional_curvature_preshape(q, h, k, step=5e-5)
    assert K1 == pytest.approx(K2, rel=1e-4, abs=1e-10)


@pytest.mark.parametrize("p", [ElasticParams(1.0, 1.0), ElasticParams(2.0, 1.5), SRVT], ids=str)
def test_open_curve_space_is_flat(p, rng):
    q = r_transform(FourierCurve(rng, OPEN, amp=0.2).curve(128), p)
    h, k = _fields(rng, q)
    assert abs(sectional_curvature_preshape(q, h, k)) < 1e-6


def test_cone_normal_is_normal(rng):
    p = ElasticParams(1.0, 1.0)
    q = r_transform(FourierCurve(rng, OPEN, amp=0.2).curve(64), p)
    h = rng.normal(size=q.values.shape)
    t = h - cone_normal_part(q, h)
    from elastica.closed_space import tangency_residual

    assert np.abs(tangency_residual(q.values, t, p)).max() < 1e-12


def test_unsupported_and_degenerate_cases(rng):
    q3 = r_transform(synth.circle(64), ElasticParams(1.0, 1.0))
    with pytest.raises(TopologyError):
        sectional_curvature_preshape(q3, *_fields(rng, q3))
    q = project_to_constraint(r_transform(synth.circle(64), SRVT))
    h = random_field(rng, q.grid)
    with pytest.raises(DegenerateBasis):
        sectional_curvature_preshape(q, h, 2 * h)


def test_oneill_term_nonnegative_and_stable(rng):
    c = synth.ellipse(96)
    for _ in range(3):
        X, Y = random_field(rng, c.grid), random_field(rng, c.grid)
        t1 = oneill_term(c, X, Y, SRVT)
        assert t1 >= 0
        assert oneill_term(c, X, Y, SRVT, step=5e-6) == pytest.approx(t1, rel=1e-3)
    X = random_field(rng, c.grid)
    assert oneill_term(c, X, X, SRVT) == 0.0
