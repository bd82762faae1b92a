import numpy as np

from elastica import synth
from elastica.curves import ElasticParams
from elastica.open_space import open_geodesic
from elastica.plotting import default_snapshots, distance_heatmap, geodesic_strip


def test_default_snapshots():
    assert default_snapshots(25) == [0, 5, 10, 15, 20, 25]
    assert default_snapshots(7) == [0, 5, 7]


def test_svg_is_deterministic(tmp_path):
    geo = open_geodesic(synth.segment(64), synth.arc(64), ElasticParams())
    curves = [geo.curve(t) for t in np.linspace(0, 1, 26)]
    times = np.linspace(0, 1, 26)
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    geodesic_strip(curves, times, a, closed=False)
    geodesic_strip(curves, times, b, closed=False)
    text = a.read_text()
    assert a.read_bytes() == b.read_bytes()
    assert "<svg" in text and "dc:date" not in text


def test_heatmap(tmp_path):
    D = np.array([[0.0, 1.0], [1.0, 0.0]])
    distance_heatmap(["x", "y"], D, tmp_path / "h.svg")
    assert (tmp_path / "h.svg").stat().st_size > 1000
