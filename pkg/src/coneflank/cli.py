"""Command-line interface.

Subcommands: classify, solve, cones, trace, perturb, export. The surface
argument is either a path to a JSON source file or an inline expression in
x and y (treated as an isotropic graph). Exit codes: 0 when the analysis
verdict holds, 2 when it fails, 1 on error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .errors import ConeFlankError
from .isomap import isotropic_to_contact_point
from .objio import write_cones_obj, write_polylines_obj
from .pipeline import PerturbSpec, Report, perturb_normals, run_analysis, surface_from_config
from .reconstruct import ToolBounds, build_cone_at, integrate_isotropic_circle


def _load_surface(arg):
    if os.path.exists(arg):
        with open(arg) as fh:
            return json.load(fh)
    return {"kind": "isotropic-expr", "f": arg}


def _parse_pair(text, caster=float):
    parts = [caster(t) for t in text.replace("x", ",").split(",") if t != ""]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two values, got {text!r}")
    return tuple(parts)


def _parse_domain(text):
    parts = [float(t) for t in text.split(",")]
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(f"expected x0,x1,y0,y1, got {text!r}")
    return tuple(parts)


def _add_common(p):
    p.add_argument("--surface", required=True, help="JSON source file or expression in x,y")
    p.add_argument("--theta", type=float, help="cone opening angle in degrees")
    p.add_argument("--radius", type=float, help="cylinder/sphere radius")
    p.add_argument("--bounds", type=lambda s: _parse_pair(s), help="tool truncation rmin,rmax")
    p.add_argument("--grid", type=lambda s: _parse_pair(s, int), default=(10, 10), help="NxM evaluation grid")
    p.add_argument("--domain", type=_parse_domain, help="x0,x1,y0,y1 top-view window")
    p.add_argument("--tol", type=float, default=1e-6, help="field tolerance")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--noise", type=float, default=0.0, help="normal perturbation magnitude")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--obj", help="OBJ output path (cones/trace/export)")
    p.add_argument("--out", help="write the report here instead of stdout")


def _emit(report: Report, args) -> int:
    if args.format == "csv":
        lines = ["x,y,residual,label"]
        for rec in report.records:
            lines.append(
                f"{rec.get('x', '')},{rec.get('y', '')},{rec.get('residual', '')},{rec.get('label', '')}"
            )
        text = "\n".join(lines) + "\n"
    else:
        text = report.to_json() + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if report.verdict == "holds" else 2


def _config_from_args(args, test):
    cfg = {"surface": _load_surface(args.surface), "test": test, "tol": args.tol,
           "seed": args.seed}
    if args.theta is not None:
        cfg["theta_deg"] = args.theta
    if args.radius is not None:
        cfg["radius"] = args.radius
    if args.domain is not None:
        cfg["domain"] = list(args.domain)
        cfg["grid"] = list(args.grid)
    if args.bounds is not None:
        cfg["bounds"] = list(args.bounds)
    if args.noise:
        cfg["noise"] = args.noise
    if getattr(args, "millability", False):
        cfg["millability"] = True
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="coneflank",
                                     description="cone-envelope detection and tool positioning")
    sub = parser.add_subparsers(dest="command", required=True)

    p_classify = sub.add_parser("classify", help="per-point classification over a grid")
    _add_common(p_classify)
    p_classify.add_argument("--test", default="cone",
                            choices=("cone", "cylinder", "channel", "pipe", "developable", "ruled"))
    p_classify.add_argument("--millability", action="store_true", help="attach millability flags")

    p_solve = sub.add_parser("solve", help="hyperosculating directions over a grid")
    _add_common(p_solve)

    p_cones = sub.add_parser("cones", help="reconstructed cone placements over a grid")
    _add_common(p_cones)

    p_trace = sub.add_parser("trace", help="trace conic top views from grid seeds")
    _add_common(p_trace)

    p_perturb = sub.add_parser("perturb", help="perturb the normals of a cloud source")
    _add_common(p_perturb)

    p_export = sub.add_parser("export", help="export cones at grid points as OBJ frusta")
    _add_common(p_export)

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except ConeFlankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "classify":
        return _emit(run_analysis(_config_from_args(args, args.test)), args)
    if cmd == "solve":
        return _emit(run_analysis(_config_from_args(args, "solve")), args)
    if cmd == "cones":
        report = run_analysis(_config_from_args(args, "cones"))
        if args.obj:
            _export_cones_from_report(report, args)
        return _emit(report, args)
    if cmd == "trace":
        return _trace(args)
    if cmd == "perturb":
        return _perturb(args)
    if cmd == "export":
        report = run_analysis(_config_from_args(args, "cones"))
        if not args.obj:
            print("error: export needs --obj", file=sys.stderr)
            return 1
        _export_cones_from_report(report, args)
        return 0 if report.verdict == "holds" else 2

    print(f"error: unknown command {cmd}", file=sys.stderr)
    return 1


def _export_cones_from_report(report, args):
    bounds = args.bounds or (0.5, 3.0)
    theta = math.radians(args.theta)
    source = _load_surface(args.surface)
    provider, scene, _ = surface_from_config(source)
    specs = []
    for rec in report.records:
        if rec.get("error"):
            continue
        built = build_cone_at(rec["x"], rec["y"], provider, theta)
        specs.extend(built.cones)
    write_cones_obj(args.obj, specs, bounds[0], bounds[1])


def _trace(args) -> int:
    if args.theta is None:
        print("error: trace needs --theta", file=sys.stderr)
        return 1
    theta = math.radians(args.theta)
    source = _load_surface(args.surface)
    provider, scene, _ = surface_from_config(source)
    if args.domain is not None:
        from .pipeline import _grid_points

        seeds = _grid_points(args.domain, args.grid)
    else:
        print("error: trace needs --domain", file=sys.stderr)
        return 1
    polylines = []
    summaries = []
    for seed in seeds:
        try:
            trace = integrate_isotropic_circle(provider, seed, theta, root_choice=0)
        except ConeFlankError as exc:
            summaries.append({"seed": list(seed), "error": str(exc)})
            continue
        grads = trace.reports.get("gradients")
        line = []
        for (x, y), f, (fx, fy) in zip(trace.points, trace.f_values, grads):
            line.append(isotropic_to_contact_point(x, y, f, fx, fy))
        polylines.append(line)
        summaries.append({
            "seed": list(seed),
            "circle_radius": trace.reports["circle_radius"],
            "circularity": trace.reports["circularity"],
            "f_consistency": trace.reports["f_consistency"],
        })
    if args.obj and polylines:
        write_polylines_obj(args.obj, polylines)
    text = json.dumps({"traces": summaries}, sort_keys=True, indent=2) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if polylines else 2


def _perturb(args) -> int:
    source = _load_surface(args.surface)
    if source.get("kind") != "cloud":
        print("error: perturb needs a cloud source", file=sys.stderr)
        return 1
    pts = np.asarray(source["points"], dtype=float)
    from .isomap import SurfaceSample

    samples = [SurfaceSample.of(row[:3], row[3:]) for row in pts]
    noisy = perturb_normals(samples, PerturbSpec(args.noise, args.seed))
    rows = [[*map(float, s.r), *map(float, s.n)] for s in noisy]
    text = json.dumps({"kind": "cloud", "points": rows}, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
