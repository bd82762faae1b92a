import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elastica import synth
from elastica.curves import (
    CLOSED,
    OPEN,
    DiscreteCurve,
    ElasticParams,
    arclength_reparam,
    curvature,
    first_variations,
    frame,
    quadrature_weights,
    resample,
    uniform_grid,
)
from elastica.errors import RegularityError, TopologyError
from elastica.selftest import FourierCurve, random_field


def test_params_validation():
    with pytest.raises(ValueError):
        ElasticParams(1.0, 0.4)
    with pytest.raises(ValueError):
        ElasticParams(0.0, 1.0)
    assert ElasticParams(1.0, 0.5).planar
    p = ElasticParams(2.0, 1.5)
    assert p.dim == 3 and p.cone_ratio == pytest.approx(1.5)
    assert p.height == pytest.approx(np.sqrt(5.0))


def test_rejects_bad_curves():
    with pytest.raises(ValueError):
        DiscreteCurve.uniform(np.zeros((3, 2)))
    pts = synth.circle(16).points.copy()
    pts[5] = pts[4]
    pts[6] = pts[4]
    with pytest.raises(RegularityError) as info:
        DiscreteCurve.uniform(pts)
    assert info.value.index is not None
    with pytest.raises(TopologyError):
        DiscreteCurve.uniform(synth.circle(16).points, topology="loop")


def test_weights_integrate_constants():
    for top in (OPEN, CLOSED):
        g = uniform_grid(37, top)
        assert quadrature_weights(g, top).sum() == pytest.approx(2 * np.pi, rel=1e-14)


def test_circle_geometry():
    c = synth.circle(256, r=2.0)
    assert c.length() == pytest.approx(4 * np.pi, rel=1e-3)
    assert np.allclose(curvature(c), 0.5, rtol=1e-4)
    fr = frame(c)
    assert np.allclose(np.linalg.norm(fr.v, axis=1), 1)
    assert np.allclose(np.einsum("ij,ij->i", fr.v, fr.n), 0)


def test_open_segment_curvature_zero():
    c = synth.segment(50)
    assert np.allclose(curvature(c), 0, atol=1e-12)
    assert c.length() == pytest.approx(2 * np.pi)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), closed=st.booleans())
def test_first_variations_match_differences(seed, closed):
    rng = np.random.default_rng(seed)
    top = CLOSED if closed else OPEN
    c = FourierCurve(rng, top).curve(128)
    h = random_field(rng, c.grid, amp=0.5)
    var = first_variations(c, h)
    eps = 1e-6
    cp, cm = c.with_points(c.points + eps * h), c.with_points(c.points - eps * h)
    fd = (curvature(cp) - curvature(cm)) / (2 * eps)
    assert np.abs(fd - var.Dkappa).max() <= 1e-5 * max(np.abs(var.Dkappa).max(), 1.0)
    fd_speed = (frame(cp).speed - frame(cm).speed) / (2 * eps)
    assert np.allclose(fd_speed, var.Dspeed, atol=1e-7)


def test_inexact_curvature_variation_converges():
    rng = np.random.default_rng(3)
    fc = FourierCurve(rng)
    errs = []
    for n in (128, 256):
        c = fc.curve(n)
        h = np.column_stack([np.cos(2 * c.grid), np.sin(3 * c.grid)])
        errs.append(np.abs(first_variations(c, h, exact=False).Dkappa - first_variations(c, h).Dkappa).max())
    assert errs[1] < errs[0] / 3


def test_resample_and_arclength():
    c = synth.ellipse(200)
    u = arclength_reparam(c)
    chords = np.linalg.norm(np.diff(np.vstack([u.points, u.points[:1]]), axis=0), axis=1)
    assert np.ptp(chords) / chords.mean() < 1e-3
    assert u.length() == pytest.approx(9.688448220547675, rel=5e-4)  # ellipse perimeter
    r = resample(c, c.grid, kind="cubic")
    assert np.allclose(r.points, c.points, atol=1e-12)
