import json

import numpy as np
import pytest

from elastica import synth
from elastica.curves import CLOSED, OPEN
from elastica.errors import ParseError, RegularityError
from elastica.shapefiles import DistanceTable, ShapeFile, load_shape, read_shape_file, save_shape, write_json


def test_circle_fixture_length(tmp_path):
    path = tmp_path / "circle.json"
    save_shape(path, synth.circle(256))
    c = load_shape(path)
    assert c.topology == CLOSED and len(c) == 256
    assert abs(c.length() - 2 * np.pi) < 1e-3


def test_three_points_rejected(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps({"name": "tiny", "topology": "closed", "points": [[0, 0], [1, 0], [0, 1]]}))
    with pytest.raises(ParseError) as info:
        load_shape(path)
    assert info.value.field == "points"


def test_duplicate_closing_point_dropped(tmp_path, caplog):
    pts = synth.circle(10).points.tolist()
    path = tmp_path / "dup.json"
    path.write_text(json.dumps({"name": "dup", "topology": "closed", "points": pts + [pts[0]]}))
    with caplog.at_level("INFO"):
        c = load_shape(path)
    assert len(c) == 10
    assert "closing point" in caplog.text


def test_round_trip_is_byte_identical(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    save_shape(a, synth.ellipse_fold(50))
    save_shape(b, read_shape_file(a))
    assert a.read_bytes() == b.read_bytes()


def test_csv_import(tmp_path):
    path = tmp_path / "seg.csv"
    rows = "\n".join(f"{x},{0.0}" for x in np.linspace(0, 1, 8))
    path.write_text("# an open segment\nx,y\n" + rows + "\n")
    c = load_shape(path, topology=OPEN)
    assert c.topology == OPEN and len(c) == 8
    path.write_text("x,y\n0,0\n1,oops\n")
    with pytest.raises(ParseError) as info:
        load_shape(path)
    assert info.value.line == 3 and info.value.field == "y"


def test_parse_errors(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ParseError) as info:
        load_shape(path)
    assert info.value.line == 1
    path.write_text(json.dumps({"topology": "closed"}))
    with pytest.raises(ParseError):
        load_shape(path)
    path.write_text(json.dumps({"topology": "closed", "points": [[0, 0], [1, 0], [1, "nan"], [0, 1]]}))
    with pytest.raises(ParseError):
        load_shape(path)
    path.write_text(json.dumps({"topology": "loop", "points": [[0, 0], [1, 0], [1, 1], [0, 1]]}))
    with pytest.raises(ParseError):
        load_shape(path)


def test_irregular_shape_reports_node(tmp_path):
    pts = synth.circle(12).points.tolist()
    pts[4] = pts[3]
    pts[5] = pts[3]
    path = tmp_path / "kink.json"
    path.write_text(json.dumps({"topology": "closed", "points": pts}))
    with pytest.raises(RegularityError) as info:
        load_shape(path)
    assert info.value.index is not None


def test_arclen_flag(tmp_path):
    path = tmp_path / "e.json"
    save_shape(path, synth.ellipse(200))
    c = load_shape(path, arclen=True)
    chords = np.linalg.norm(np.diff(np.vstack([c.points, c.points[:1]]), axis=0), axis=1)
    assert np.ptp(chords) / chords.mean() < 1e-3


def test_distance_table(tmp_path):
    D = np.array([[5.0, 1.0], [1.0005, 0.0]])
    t = DistanceTable(["a", "b"], D, np.zeros((2, 2)), [["ok", "ok"], ["ok", "ok"]], audited=True)
    assert t.distances[0, 0] == 0
    assert t.max_asymmetry() == pytest.approx(0.0005 / 1.0005)
    t.write(tmp_path / "table")
    data = json.loads((tmp_path / "table.json").read_text())
    assert data["distances"][1][0] == 1.0005
    lines = (tmp_path / "table.csv").read_text().splitlines()
    assert lines[0] == "from\\to,a,b" and lines[2].startswith("b,1.0005")


def test_write_json_cleans_numpy(tmp_path):
    write_json(tmp_path / "x.json", {"a": np.float64(np.nan), "b": np.arange(3), "c": np.bool_(True)})
    assert json.loads((tmp_path / "x.json").read_text()) == {"a": None, "b": [0, 1, 2], "c": True}
