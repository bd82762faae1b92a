"""Shape files, geodesic path files and distance tables."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .curves import CLOSED, OPEN, DiscreteCurve, arclength_reparam, uniform_grid
from .errors import ParseError, RegularityError

log = logging.getLogger(__name__)


@dataclass
class ShapeFile:
    name: str
    topology: str
    points: np.ndarray
    grid: np.ndarray | None = None

    def __post_init__(self):
        if self.topology not in (OPEN, CLOSED):
            raise ParseError(f"topology must be 'open' or 'closed', got {self.topology!r}", field="topology")
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ParseError("points must be a list of [x, y] pairs", field="points")
        if not np.all(np.isfinite(pts)):
            bad = int(np.flatnonzero(~np.isfinite(pts).all(axis=1))[0])
            raise ParseError(f"non-finite coordinate at point {bad}", field="points")
        if self.topology == CLOSED and len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
            log.info("%s: dropping duplicated closing point", self.name)
            pts = pts[:-1]
            if self.grid is not None:
                self.grid = np.asarray(self.grid, dtype=float)[:-1]
        if len(pts) < 4:
            raise ParseError(f"a shape needs at least 4 points, got {len(pts)}", field="points")
        self.points = pts
        if self.grid is not None:
            self.grid = np.asarray(self.grid, dtype=float)
            if self.grid.shape != (len(pts),):
                raise ParseError("grid length must match the number of points", field="grid")

    def to_curve(self, arclen: bool = False) -> DiscreteCurve:
        grid = self.grid if self.grid is not None else uniform_grid(len(self.points), self.topology)
        c = DiscreteCurve(self.points, grid, self.topology)
        return arclength_reparam(c) if arclen else c

    @classmethod
    def from_curve(cls, name: str, c: DiscreteCurve, with_grid: bool = False):
        return cls(name, c.topology, np.array(c.points), np.array(c.grid) if with_grid else None)

    def to_dict(self):
        out = {"name": self.name, "topology": self.topology, "points": self.points.tolist()}
        if self.grid is not None:
            out["grid"] = self.grid.tolist()
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def _parse_json(text: str, stem: str) -> ShapeFile:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(obj, dict):
        raise ParseError("top level must be an object", line=1)
    for key in ("topology", "points"):
        if key not in obj:
            raise ParseError(f"missing field {key!r}", field=key)
    try:
        return ShapeFile(obj.get("name", stem), obj["topology"], obj["points"], obj.get("grid"))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"malformed points: {exc}", field="points") from exc


def _parse_csv(text: str, stem: str, topology: str) -> ShapeFile:
    rows = []
    header_seen = False
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not cell.strip() for cell in row) or row[0].lstrip().startswith("#"):
            continue
        if len(row) < 2:
            raise ParseError(f"line {lineno}: expected two columns", line=lineno)
        try:
            rows.append([float(row[0]), float(row[1])])
        except ValueError as exc:
            if not rows and not header_seen:
                header_seen = True  # one header line before the data
                continue
            raise ParseError(f"line {lineno}: {exc}", line=lineno, field="x" if _bad(row[0]) else "y") from exc
    return ShapeFile(stem, topology, rows)


def _bad(cell):
    try:
        float(cell)
        return False
    except ValueError:
        return True


def read_shape_file(path, topology: str = CLOSED) -> ShapeFile:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".csv":
        return _parse_csv(text, path.stem, topology)
    return _parse_json(text, path.stem)


def load_shape(path, topology: str = CLOSED, arclen: bool = False) -> DiscreteCurve:
    """Curve from a ShapeFile (JSON) or a two-column CSV file.

    ``topology`` applies to CSV input only; JSON files carry their own.
    """
    sf = read_shape_file(path, topology)
    try:
        return sf.to_curve(arclen)
    except RegularityError as exc:
        raise RegularityError(f"{path}: {exc}", exc.index) from exc


def save_shape(path, shape: ShapeFile | DiscreteCurve, name: str | None = None):
    if isinstance(shape, DiscreteCurve):
        shape = ShapeFile.from_curve(name or Path(path).stem, shape)
    Path(path).write_text(shape.dumps())


# --- results ---------------------------------------------------------------------------------


def _clean(x):
    """JSON-safe conversion of numpy containers and non-finite floats."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_json(path, obj):
    Path(path).write_text(json.dumps(_clean(obj), indent=1) + "\n")


def path_record(method, times, curves, config, diagnostics=None, distance=None):
    return {
        "method": method,
        "config": config,
        "distance": distance,
        "times": list(times),
        "curves": [np.asarray(c.points).tolist() for c in curves],
        "diagnostics": diagnostics or {},
    }


@dataclass
class DistanceTable:
    names: list
    distances: np.ndarray  # distances[i, j] computed from i to j
    seconds: np.ndarray
    status: list = field(default_factory=list)  # status[i][j]
    audited: bool = False

    def __post_init__(self):
        np.fill_diagonal(self.distances, 0.0)

    def max_asymmetry(self) -> float:
        D = self.distances
        num = np.abs(D - D.T)
        den = np.maximum(np.abs(D), np.abs(D.T))
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.where(den > 0, num / den, 0.0)
        return float(np.nanmax(rel)) if rel.size else 0.0

    def to_dict(self):
        return {
            "names": self.names,
            "distances": self.distances,
            "seconds": self.seconds,
            "status": self.status,
            "audited": self.audited,
            "max_asymmetry": self.max_asymmetry() if self.audited else None,
        }

    def write(self, stem):
        stem = Path(stem)
        write_json(stem.with_suffix(".json"), self.to_dict())
        with open(stem.with_suffix(".csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["from\\to"] + list(self.names))
            for name, row in zip(self.names, self.distances):
                w.writerow([name] + [repr(float(v)) for v in row])
