"""Command line interface: ``elastica dist|geodesic|match|synth|selftest``.

Exit codes: 0 success, 1 usage or input errors, 2 numerical failure,
3 incompleteness detected.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import errors, synth
from .closed_space import param_distance
from .curves import CLOSED, OPEN, DiscreteCurve, ElasticParams, resample
from .matching import solve_bvp_shapes
from .open_space import open_distance, open_geodesic
from .shapefiles import DistanceTable, ShapeFile, load_shape, path_record, save_shape, write_json

log = logging.getLogger("elastica")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_INCOMPLETE = 0, 1, 2, 3

INPUT_ERRORS = (errors.TopologyError, errors.ParseError, errors.RegularityError, errors.GridMismatch, FileNotFoundError, ValueError)
NUMERIC_ERRORS = (
    errors.ConeViolation,
    errors.DegenerateInterior,
    errors.ExistenceTimeExceeded,
    errors.DegenerateBasis,
    errors.NewtonDivergence,
    errors.NoConvergence,
    errors.MonotonicityLost,
    errors.SingularSystem,
    np.linalg.LinAlgError,
)


@dataclass(frozen=True)
class RunConfig:
    a: float = 1.0
    b: float = 0.5
    steps: int = 25
    tol_f: float = 1e-10
    eps_bvp: float = 1e-5  # relative to the norm of the target lift
    tol_rel: float = 1e-4
    max_iter: int = 500
    max_outer: int = 100
    refine: bool = True
    cap: int = 8
    out: str = "out"
    seed: int = 0

    def __post_init__(self):
        for name in ("tol_f", "eps_bvp", "tol_rel"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.steps < 1 or self.max_iter < 1 or self.max_outer < 1 or self.cap < 1:
            raise ValueError("step and iteration counts must be positive")
        self.params  # validates 4b^2 >= a^2

    @property
    def params(self) -> ElasticParams:
        return ElasticParams(self.a, self.b)

    @classmethod
    def from_args(cls, ns):
        keys = cls.__dataclass_fields__
        return cls(**{k: getattr(ns, k) for k in keys if getattr(ns, k, None) is not None})


# --- computations (top level so worker processes can pickle them) --------------------------


def _common_grid(c0: DiscreteCurve, c1: DiscreteCurve) -> DiscreteCurve:
    """c1 resampled on c0's grid when the two grids differ."""
    if len(c0) == len(c1) and np.allclose(c0.grid, c1.grid):
        return c1
    return resample(c1, c0.grid, kind="cubic")


def pair_distance(c0, c1, cfg: RunConfig, match: bool):
    """(distance, status, extra) for one ordered pair; never raises numerical errors."""
    p = cfg.params
    c1 = _common_grid(c0, c1)
    try:
        if c0.topology == OPEN:
            return open_distance(c0, c1, p), "ok", {}
        if match:
            r = solve_bvp_shapes(
                c0, c1, p, cfg.steps, tol_rel=cfg.tol_rel, max_outer=cfg.max_outer, refine=cfg.refine, cap=cfg.cap,
                eps_bvp_rel=cfg.eps_bvp, max_iter=cfg.max_iter,
            )
            return r.final_distance, "incomplete" if r.incomplete else "ok", {"iterations": r.iterations}
        eps = cfg.eps_bvp * _target_norm(c1, p)
        dist, _ = param_distance(c0, c1, p, cfg.steps, eps_bvp=eps, max_iter=cfg.max_iter, tol_F=cfg.tol_f)
        return dist, "ok", {}
    except NUMERIC_ERRORS as exc:
        return float("nan"), f"failed: {type(exc).__name__}: {exc}", {}


def _target_norm(c, p):
    from .transforms import r_transform

    return r_transform(c, p).norm()


def _pair_job(args):
    i, j, c0, c1, cfg, match = args
    t0 = time.perf_counter()
    d, status, extra = pair_distance(c0, c1, cfg, match)
    return i, j, d, status, time.perf_counter() - t0


def _check_topology(curves, want_open: bool):
    tops = {c.topology for c in curves}
    if len(tops) > 1:
        raise errors.TopologyError("shapes mix open and closed curves")
    top = tops.pop()
    if want_open and top != OPEN:
        raise errors.TopologyError("--open was given but the shapes are closed")
    return top


def distance_table(names, curves, cfg: RunConfig, match=False, audit=False, workers=1) -> DistanceTable:
    n = len(curves)
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j and (audit or i < j)]
    jobs = [(i, j, curves[i], curves[j], cfg, match) for i, j in pairs]
    D = np.zeros((n, n))
    S = np.zeros((n, n))
    status = [["ok" if i == j else "" for j in range(n)] for i in range(n)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_pair_job, jobs))
    else:
        results = [_pair_job(job) for job in jobs]
    for i, j, d, st, secs in results:
        D[i, j], S[i, j], status[i][j] = d, secs, st
        if not audit:
            D[j, i], S[j, i], status[j][i] = d, secs, st
    return DistanceTable(list(names), D, S, status, audited=audit)


# --- commands ----------------------------------------------------------------------------------


def _load(paths, ns):
    topology = OPEN if getattr(ns, "open", False) else CLOSED
    return [Path(p).stem for p in paths], [load_shape(p, topology, ns.arclen) for p in paths]


def _outdir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_dist(ns, cfg: RunConfig) -> int:
    from .plotting import distance_heatmap

    if len(ns.shapes) < 2:
        raise ValueError("dist needs at least two shapes")
    names, curves = _load(ns.shapes, ns)
    _check_topology(curves, ns.open)
    table = distance_table(names, curves, cfg, ns.match, ns.audit_symmetry, ns.workers)
    out = _outdir(cfg)
    table.write(out / "distances")
    distance_heatmap(names, np.nan_to_num(table.distances, nan=0.0), out / "distances.svg")
    off = [table.status[i][j] for i in range(len(names)) for j in range(len(names)) if i != j and table.status[i][j]]
    for i, row in enumerate(table.distances):
        print(",".join([names[i]] + [f"{v:.10g}" for v in row]))
    if ns.audit_symmetry:
        print(f"max relative asymmetry: {table.max_asymmetry():.3e}")
    if off and all(s.startswith("failed") for s in off):
        return EXIT_NUMERIC
    if any(s == "incomplete" for s in off):
        return EXIT_INCOMPLETE
    return EXIT_OK


def _snapshots(ns, steps):
    from .plotting import default_snapshots

    if not ns.snapshots:
        return default_snapshots(steps)
    idx = [int(s) for s in ns.snapshots.split(",")]
    if any(i < 0 or i > steps for i in idx):
        raise ValueError(f"snapshot indices must lie in [0, {steps}]")
    return idx


def cmd_geodesic(ns, cfg: RunConfig) -> int:
    from .plotting import descent_figure, geodesic_strip, matching_figure

    names, curves = _load([ns.start, ns.end], ns)
    top = _check_topology(curves, ns.open)
    c0, c1 = curves[0], _common_grid(curves[0], curves[1])
    p, N = cfg.params, cfg.steps
    out = _outdir(cfg)
    stem = out / f"{names[0]}__{names[1]}"
    times = np.linspace(0.0, 1.0, N + 1)
    config = asdict(cfg) | {"match": bool(ns.match), "arclen": bool(ns.arclen)}
    code = EXIT_OK

    if top == OPEN:
        geo = open_geodesic(c0, c1, p)
        path_curves = [geo.curve(float(t)) for t in times]
        rec = path_record("flat", times, path_curves, config, {"branch": geo.branch_k}, geo.distance)
    elif ns.match:
        try:
            res = solve_bvp_shapes(
                c0, c1, p, N, tol_rel=cfg.tol_rel, max_outer=cfg.max_outer, refine=cfg.refine, cap=cfg.cap,
                eps_bvp_rel=cfg.eps_bvp, max_iter=cfg.max_iter, raise_on_incomplete=False,
            )
        except errors.IncompletenessDetected as exc:  # pragma: no cover - only with raise_on_incomplete
            res, code = exc.result, EXIT_INCOMPLETE
        if res.incomplete:
            code = EXIT_INCOMPLETE
        path_curves = res.path.curves(c0.points[0]) if res.path is not None else [c0]
        diag = {
            "distance_history": res.distance_history,
            "refinement_log": res.refinement_log,
            "initial_distance": res.initial_distance,
            "iterations": res.iterations,
            "converged": res.converged,
            "incomplete": res.incomplete,
            "nodes": len(res.psi),
            "max_image_gap": res.max_image_gap(),
            "psi_grid": res.psi.grid,
            "psi_values": res.psi.values,
        } | res.diagnostics
        rec = path_record("matched", res.path.times if res.path is not None else [0.0], path_curves, config, diag, res.final_distance)
        matching_figure(c0, curves[1], res, f"{stem}.matching.svg")
        descent_figure(res.distance_history, f"{stem}.descent.svg")
        times = res.path.times if res.path is not None else times
    else:
        eps = cfg.eps_bvp * _target_norm(c1, p)
        dist, path = param_distance(c0, c1, p, N, eps_bvp=eps, max_iter=cfg.max_iter, tol_F=cfg.tol_f)
        path_curves = path.curves(c0.points[0])
        rec = path_record("rattle", path.times, path_curves, config, path.diagnostics, dist)
        times = path.times

    write_json(f"{stem}.json", rec)
    idx = _snapshots(ns, len(path_curves) - 1)
    geodesic_strip(path_curves, times, f"{stem}.svg", idx, closed=(top == CLOSED), title=f"{names[0]} to {names[1]}")
    print(f"{rec['method']} distance {rec['distance']:.10g}; wrote {stem}.json and {stem}.svg")
    return code


def cmd_match(ns, cfg: RunConfig) -> int:
    ns.match = True
    return cmd_geodesic(ns, cfg)


def _param_value(text):
    try:
        return float(text)
    except ValueError:
        return text


def cmd_synth(ns, cfg: RunConfig) -> int:
    params = {}
    for item in ns.param or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"shape parameters are key=value, got {item!r}")
        params[key] = _param_value(val)
    if "arms" in params:
        params["arms"] = int(params["arms"])
    c = synth.make(ns.kind, ns.n, **params)
    if ns.noise:
        rng = np.random.default_rng(cfg.seed)
        c = c.with_points(c.points + ns.noise * rng.standard_normal(c.points.shape))
    name = ns.name or ns.kind
    out = _outdir(cfg)
    path = out / f"{name}.json"
    save_shape(path, ShapeFile.from_curve(name, c))
    print(path)
    return EXIT_OK


def cmd_selftest(ns, cfg: RunConfig) -> int:
    from .selftest import run_all

    report = run_all(quick=ns.quick, seed=cfg.seed, tol_F=ns.tol_f, progress=lambda r: print(r.line(), flush=True))
    out = _outdir(cfg)
    write_json(out / "selftest.json", report)
    print(f"{'PASS' if report['passed'] else 'FAIL'} overall ({report['seconds']:.1f}s); report in {out / 'selftest.json'}")
    return EXIT_OK if report["passed"] else EXIT_NUMERIC


# --- argument parsing --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(sp):
    g = sp.add_argument_group("run configuration")
    g.add_argument("--a", type=float, help="bending weight (default 1)")
    g.add_argument("--b", type=float, help="stretching weight (default 0.5)")
    g.add_argument("--steps", type=int, help="time steps of the discrete geodesic (default 25)")
    g.add_argument("--tol-f", dest="tol_f", type=float, help="closure constraint tolerance (default 1e-10)")
    g.add_argument("--eps-bvp", dest="eps_bvp", type=float, help="shooting tolerance relative to the target norm (default 1e-5)")
    g.add_argument("--tol-rel", dest="tol_rel", type=float, help="relative decrease that stops the descent (default 1e-4)")
    g.add_argument("--max-iter", dest="max_iter", type=int, help="shooting iterations (default 500)")
    g.add_argument("--max-outer", dest="max_outer", type=int, help="descent iterations (default 100)")
    g.add_argument("--refine", action=argparse.BooleanOptionalAction, default=None, help="adaptive grid refinement (default on)")
    g.add_argument("--cap", type=int, help="node cap as a multiple of the initial node count (default 8)")
    g.add_argument("--out", help="output directory (default ./out)")
    g.add_argument("--seed", type=int, help="random seed (default 0)")
    g.add_argument("-v", "--verbose", action="count", default=0)


def _add_shapes(sp):
    sp.add_argument("--arclen", action="store_true", help="reparameterize inputs proportional to arc length")
    sp.add_argument("--open", action="store_true", help="open-curve mode (CSV inputs are read as open)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="elastica", description="Elastic distances, geodesics and matching of plane curves.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("dist", help="pairwise distance table")
    sp.add_argument("shapes", nargs="+")
    sp.add_argument("--match", action="store_true", help="unparameterized distance (optimize over reparameterizations)")
    sp.add_argument("--audit-symmetry", dest="audit_symmetry", action="store_true", help="compute both directions")
    sp.add_argument("--workers", type=int, default=1)
    _add_shapes(sp)
    _add_common(sp)
    sp.set_defaults(func=cmd_dist)

    for name, func, helptext in (
        ("geodesic", cmd_geodesic, "geodesic between two shapes"),
        ("match", cmd_match, "match two shapes over reparameterizations"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("start")
        sp.add_argument("end")
        if name == "geodesic":
            sp.add_argument("--match", action="store_true", help="optimize over reparameterizations first")
        sp.add_argument("--snapshots", help="comma separated time step indices for the figure (default every 5th)")
        _add_shapes(sp)
        _add_common(sp)
        sp.set_defaults(func=func)

    sp = sub.add_parser("synth", help="write a synthetic shape file")
    sp.add_argument("kind", choices=sorted(synth.KINDS))
    sp.add_argument("--n", type=int, default=300)
    sp.add_argument("--param", action="append", metavar="KEY=VALUE", help="shape parameter, repeatable")
    sp.add_argument("--noise", type=float, default=0.0, help="seeded Gaussian perturbation of the points")
    sp.add_argument("--name")
    _add_common(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("selftest", help="run the acceptance checks")
    sp.add_argument("--quick", action="store_true", help="small subset for smoke testing")
    _add_common(sp)
    sp.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.from_args(ns)
        return ns.func(ns, cfg)
    except errors.IncompletenessDetected as exc:
        print(f"incomplete: {exc}", file=sys.stderr)
        return EXIT_INCOMPLETE
    except INPUT_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
