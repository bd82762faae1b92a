import json
import math

import numpy as np
import pytest

from elastica import synth
from elastica.cli import RunConfig, main
from elastica.shapefiles import save_shape


@pytest.fixture
def shapes(tmp_path):
    d = tmp_path / "shapes"
    for kind, n in (("circle", 200), ("ellipse", 200), ("ellipse_fold", 200), ("segment", 100), ("arc", 100)):
        assert main(["synth", kind, "--n", str(n), "--out", str(d)]) == 0
    return d


def test_synth_writes_shape(shapes):
    data = json.loads((shapes / "circle.json").read_text())
    assert data["topology"] == "closed" and len(data["points"]) == 200
    assert np.allclose(np.linalg.norm(data["points"], axis=1), 1.0)


def test_synth_noise_is_seeded(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        main(["synth", "circle", "--n", "32", "--noise", "1e-3", "--seed", "7", "--out", str(out)])
    assert (a / "circle.json").read_bytes() == (b / "circle.json").read_bytes()


def test_dist_same_shape_zero(shapes, tmp_path):
    out = tmp_path / "o"
    c = str(shapes / "circle.json")
    assert main(["dist", c, c, "--out", str(out)]) == 0
    data = json.loads((out / "distances.json").read_text())
    assert data["distances"] == [[0.0, 0.0], [0.0, 0.0]]


def test_dist_audit_symmetry(shapes, tmp_path):
    out = tmp_path / "o"
    files = [str(shapes / f"{k}.json") for k in ("ellipse", "ellipse_fold")]
    assert main(["dist", *files, "--audit-symmetry", "--out", str(out)]) == 0
    data = json.loads((out / "distances.json").read_text())
    D = np.array(data["distances"])
    assert D[0, 1] > 0 and abs(D[0, 1] - D[1, 0]) <= 1e-3 * D[0, 1]
    assert data["max_asymmetry"] <= 1e-3
    assert (out / "distances.csv").exists() and (out / "distances.svg").exists()


def test_open_flag_on_closed_shapes_is_usage_error(shapes, tmp_path, capsys):
    files = [str(shapes / "circle.json"), str(shapes / "ellipse.json")]
    assert main(["dist", *files, "--open", "--out", str(tmp_path)]) == 1
    assert "TopologyError" in capsys.readouterr().err


def test_usage_errors_exit_1(shapes):
    with pytest.raises(SystemExit) as info:
        main(["dist", "--bogus"])
    assert info.value.code == 1
    assert main(["dist", str(shapes / "circle.json")]) == 1
    assert main(["dist", "missing.json", "other.json"]) == 1
    assert main(["dist", str(shapes / "circle.json"), str(shapes / "ellipse.json"), "--b", "0.1"]) == 1


def test_geodesic_open_pair_is_flat(shapes, tmp_path):
    out = tmp_path / "g"
    assert main(["geodesic", str(shapes / "segment.json"), str(shapes / "arc.json"), "--out", str(out)]) == 0
    rec = json.loads((out / "segment__arc.json").read_text())
    assert rec["method"] == "flat" and len(rec["curves"]) == 26
    assert (out / "segment__arc.svg").exists()


def test_geodesic_identical_shapes_has_zero_energy(shapes, tmp_path):
    out = tmp_path / "g"
    c = str(shapes / "ellipse.json")
    assert main(["geodesic", c, c, "--out", str(out)]) == 0
    rec = json.loads((out / "ellipse__ellipse.json").read_text())
    assert rec["distance"] == 0.0
    assert max(rec["diagnostics"]["energy"]) == 0.0
    first = np.array(rec["curves"][0])
    assert all(np.allclose(np.array(cv), first) for cv in rec["curves"])


def test_match_refine_contrast(shapes, tmp_path):
    files = [str(shapes / "ellipse.json"), str(shapes / "ellipse_fold.json")]
    h0 = 2 * math.pi / 200
    gaps = {}
    for flag in ("--refine", "--no-refine"):
        out = tmp_path / flag
        assert main(["match", *files, flag, "--out", str(out)]) == 0
        rec = json.loads((out / "ellipse__ellipse_fold.json").read_text())
        diag = rec["diagnostics"]
        gaps[flag] = diag["max_image_gap"] / h0
        assert rec["distance"] < diag["initial_distance"]
        if flag == "--refine":
            assert diag["refinement_log"]
        assert (out / "ellipse__ellipse_fold.matching.svg").exists()
    assert gaps["--refine"] <= 1 + 1e-9
    assert gaps["--no-refine"] > 2


def test_incomplete_exit_code(shapes, tmp_path):
    files = [str(shapes / "ellipse.json"), str(shapes / "ellipse_fold.json")]
    assert main(["match", *files, "--cap", "1", "--out", str(tmp_path)]) == 3


def test_runconfig_validation():
    with pytest.raises(ValueError):
        RunConfig(tol_f=0)
    with pytest.raises(ValueError):
        RunConfig(a=1, b=0.2)
    assert RunConfig().steps == 25


def test_selftest_quick(tmp_path):
    assert main(["selftest", "--quick", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "selftest.json").read_text())
    assert report["passed"] and report["seconds"] < 60
