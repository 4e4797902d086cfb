"""End-to-end analysis: surface sources, sampling, perturbation, reports.

A surface source is one of

* ``{"kind": "isotropic-expr", "f": "<expr in x, y>"}`` — the graph in the
  plane model itself, analyzed with exact jets;
* ``{"kind": "parametric", "X": ..., "Y": ..., "Z": ..., "orientation": 1}``
  — a design-space chart (expressions in x, y standing for the two chart
  parameters), sampled into an oriented point cloud;
* ``{"kind": "cloud", "points": [[px,py,pz,nx,ny,nz], ...]}`` — raw
  oriented samples.

Cloud-backed analyses rotate the data so the mean normal points up, map
samples into the plane model, and answer jet queries with the moving
quartic fit. Reports are deterministic: identical config + input + seed
give byte-identical JSON (no timestamps anywhere).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import classify as _classify
from .classify import ToolParams, classify_field, millability_check
from .contact import solve_hyperosculating
from .errors import ConeFlankError, ConfigError, DegenerateNormal, NegativeNoise
from .isomap import (
    SurfaceSample,
    align_to_mean_normal,
    inverse_stereographic,
    isotropic_to_contact_point,
    sample_to_isotropic,
)
from .jets import ScatterFitConfig, jet_of_expression, parse_expression, scattered_jet_provider
from .reconstruct import ToolBounds, build_cone_at, build_cone_candidates, integrate_isotropic_circle

PACKAGE_VERSION = "0.1.0"
REPORT_SCHEMA = "cone-flank/1"

_MASK64 = (1 << 64) - 1


class Xorshift64Star:
    """xorshift64* generator: x ^= x>>12; x ^= x<<25; x ^= x>>27; x * 0x2545F4914F6CDD1D.

    Chosen because the recurrence is trivially portable and the docs can
    state it completely, making the perturbation experiments reproducible
    across implementations. A zero seed is remapped to a fixed odd
    constant.
    """

    MULT = 0x2545F4914F6CDD1D

    def __init__(self, seed: int):
        self.state = (int(seed) & _MASK64) or 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self.state
        x ^= (x >> 12)
        x ^= (x << 25) & _MASK64
        x ^= (x >> 27)
        self.state = x
        return (x * self.MULT) & _MASK64

    def uniform(self, lo: float, hi: float) -> float:
        u = self.next_u64() >> 11  # 53 random bits
        return lo + (hi - lo) * (u * (2.0**-53))


@dataclass(frozen=True)
class PerturbSpec:
    """Normal-noise magnitude and RNG seed; r = 0 is the identity."""

    r: float
    seed: int = 0

    def __post_init__(self):
        if self.r < 0.0:
            raise NegativeNoise(f"noise magnitude {self.r} < 0")


def perturb_normals(samples, spec: PerturbSpec):
    """Tilt each unit normal by a random in-tangent-plane vector of length r.

    The frame direction d1 is the least-aligned coordinate axis projected
    to the plane orthogonal to n, d2 = n x d1; the tilt angle phi is
    uniform on [-pi, pi). Positions are unchanged; outputs are unit.
    """
    rng = Xorshift64Star(spec.seed)
    out = []
    for s in samples:
        n = s.n
        axis = int(np.argmin(np.abs(n)))
        e = np.zeros(3)
        e[axis] = 1.0
        d1 = e - float(np.dot(n, e)) * n
        d1 /= np.linalg.norm(d1)
        d2 = np.cross(n, d1)
        phi = rng.uniform(-math.pi, math.pi)
        v = spec.r * math.cos(phi) * d1 + spec.r * math.sin(phi) * d2
        nn = n + v
        out.append(SurfaceSample(s.r, nn / np.linalg.norm(nn)))
    return out


# ---------------------------------------------------------------------------
# Surface sources
# ---------------------------------------------------------------------------


def sample_parametric(source: dict, grid=(40, 40), domain=(0.0, 1.0, 0.0, 1.0)):
    """Sample a parametric chart into oriented SurfaceSamples.

    Positions come from the three expressions; normals from the normalized
    cross product of the two first partials (computed by Taylor
    propagation, not differences), times the orientation sign. Nodes with
    a vanishing cross product are skipped and reported.
    """
    ax = parse_expression(source["X"]) if isinstance(source["X"], str) else source["X"]
    ay = parse_expression(source["Y"]) if isinstance(source["Y"], str) else source["Y"]
    az = parse_expression(source["Z"]) if isinstance(source["Z"], str) else source["Z"]
    sign = float(source.get("orientation", 1))
    n_s, n_t = grid
    s0, s1, t0, t1 = domain
    samples = []
    skipped = []
    for i in range(n_s):
        s = s0 + (s1 - s0) * (i / max(n_s - 1, 1))
        for k in range(n_t):
            t = t0 + (t1 - t0) * (k / max(n_t - 1, 1))
            pos = np.zeros(3)
            du = np.zeros(3)
            dv = np.zeros(3)
            for m, ast in enumerate((ax, ay, az)):
                series = ast.taylor4(s, t)
                pos[m] = series.c[0, 0]
                du[m] = series.c[1, 0]
                dv[m] = series.c[0, 1]
            cross = np.cross(du, dv)
            norm = float(np.linalg.norm(cross))
            if norm < 1e-12 * max(1.0, float(np.linalg.norm(du)) * float(np.linalg.norm(dv))):
                skipped.append((s, t, "DegenerateNormal"))
                continue
            samples.append(SurfaceSample(pos, sign * cross / norm))
    if not samples:
        raise DegenerateNormal("every node of the chart is degenerate")
    return samples, skipped


@dataclass
class CloudScene:
    """A cloud mapped into the plane model, with the alignment rotation."""

    rotation: np.ndarray
    samples: list
    iso_samples: list
    fit: ScatterFitConfig

    def provider(self):
        return scattered_jet_provider(self.iso_samples, self.fit)

    def to_world_point(self, p):
        return self.rotation.T @ np.asarray(p, dtype=float)

    def to_world_vector(self, v):
        return self.rotation.T @ np.asarray(v, dtype=float)


def prepare_cloud(samples, fit: ScatterFitConfig | None = None, align=True,
                  south_pole_margin=0.95) -> CloudScene:
    """Rotate, map, and index an oriented cloud for jet queries.

    Samples whose rotated normals are still too close to the excluded
    direction are dropped (they cannot be represented in the graph model).
    """
    if align:
        rot, rotated = align_to_mean_normal(samples)
    else:
        rot, rotated = np.eye(3), list(samples)
    iso = []
    kept = []
    for s in rotated:
        if s.n[2] <= -south_pole_margin:
            continue
        iso.append(sample_to_isotropic(s))
        kept.append(s)
    if not iso:
        raise ConfigError("no usable samples after alignment (all normals near the excluded direction)")
    return CloudScene(rot, kept, iso, fit or ScatterFitConfig())


def surface_from_config(source, fit: ScatterFitConfig | None = None, align=True,
                        noise: PerturbSpec | None = None):
    """Build (jet_provider, scene-or-None, f_eval-or-None) from a source spec.

    noise, when given, perturbs the sampled normals before mapping (only
    meaningful for parametric/cloud sources).
    """
    if isinstance(source, str):
        source = {"kind": "isotropic-expr", "f": source}
    kind = source.get("kind")
    if kind == "isotropic-expr":
        ast = parse_expression(source["f"])
        provider = lambda x, y: jet_of_expression(ast, x, y)
        return provider, None, ast.evaluate
    if kind == "parametric":
        samples, _ = sample_parametric(source, tuple(source.get("grid", (40, 40))),
                                       tuple(source.get("domain", (0.0, 1.0, 0.0, 1.0))))
    elif kind == "cloud":
        pts = np.asarray(source["points"], dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 6:
            raise ConfigError("cloud points must be rows [px,py,pz,nx,ny,nz]")
        samples = [SurfaceSample.of(row[:3], row[3:]) for row in pts]
    else:
        raise ConfigError(f"unknown surface kind {kind!r}")
    if noise is not None and noise.r > 0.0:
        samples = perturb_normals(samples, noise)
    scene = prepare_cloud(samples, fit, align)
    return scene.provider(), scene, None


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class Report:
    schema: str
    test: str
    tool: dict
    records: list
    summary: dict
    provenance: dict

    @property
    def verdict(self) -> str:
        return self.summary.get("verdict", "error")

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": self.schema,
                "test": self.test,
                "tool": self.tool,
                "records": self.records,
                "summary": self.summary,
                "provenance": self.provenance,
            },
            sort_keys=True,
            indent=2,
        )


def _canonical_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


def _grid_points(domain, grid):
    x0, x1, y0, y1 = domain
    nx, ny = grid
    pts = []
    for i in range(nx):
        for k in range(ny):
            pts.append((x0 + (x1 - x0) * ((i + 0.5) / nx), y0 + (y1 - y0) * ((k + 0.5) / ny)))
    return pts


def _summary_stats(values):
    finite = [v for v in values if v is not None and math.isfinite(v)]
    if not finite:
        return {"p50": None, "p95": None, "max": None}
    arr = np.array(finite)
    return {
        "p50": float(np.percentile(arr, 50)),
        "p95": float(np.percentile(arr, 95)),
        "max": float(arr.max()),
    }


def run_analysis(config: dict) -> Report:
    """Drive one analysis end to end and return a deterministic Report.

    config keys: surface (source spec or expression string), test (one of
    cone|cylinder|channel|pipe|developable|ruled|solve|cones), theta_deg,
    radius, orientation, grid [N,M], domain [x0,x1,y0,y1], points (explicit
    evaluation points, overriding grid), bounds [rmin,rmax], tol, seed,
    noise, align, millability (bool), fit {k, bandwidth_factor,
    condition_cap}.
    """
    if "surface" not in config:
        raise ConfigError("config needs a 'surface'")
    test = config.get("test", "cone")
    tol = float(config.get("tol", 1e-6))
    theta = math.radians(config["theta_deg"]) if "theta_deg" in config else None
    radius = config.get("radius")
    orientation = config.get("orientation", "inward")
    if test in ("cone", "cones", "solve") and theta is None:
        raise ConfigError(f"test {test!r} needs theta_deg")
    if test in ("cylinder", "pipe") and radius is None:
        raise ConfigError(f"test {test!r} needs radius")
    tool = ToolParams(theta=theta, radius=radius, orientation=orientation)

    fit_cfg = ScatterFitConfig(**config["fit"]) if "fit" in config else None
    noise = None
    if config.get("noise", 0.0):
        noise = PerturbSpec(float(config["noise"]), int(config.get("seed", 0)))
    provider, scene, _ = surface_from_config(config["surface"], fit_cfg,
                                             config.get("align", True), noise)

    if "points" in config:
        points = [tuple(p) for p in config["points"]]
    elif "domain" in config:
        points = _grid_points(config["domain"], tuple(config.get("grid", (10, 10))))
    elif scene is not None:
        stride = max(1, len(scene.iso_samples) // int(config.get("max_points", 100)))
        points = [(s.x, s.y) for s in scene.iso_samples[::stride]]
    else:
        raise ConfigError("need 'points' or 'domain' for an expression surface")
    if not points:
        raise ConfigError("empty evaluation grid")

    records = []
    residuals = []
    want_mill = bool(config.get("millability", False))

    if test in ("cone", "cylinder", "channel", "pipe", "developable", "ruled"):
        result = classify_field(provider, tool, points, test, field_tol=tol)
        for pt, res, verdict, err in zip(result.points, result.residuals, result.verdicts, result.errors):
            rec = {"x": pt[0], "y": pt[1], "residual": None if not math.isfinite(res) else res,
                   "error": err}
            if verdict is not None:
                rec["label"] = verdict.label
                rec["witness"] = list(verdict.witness) if verdict.witness else None
            if want_mill and err is None:
                rec["millability"] = millability_check(provider(*pt))
            records.append(rec)
            residuals.append(res if math.isfinite(res) else None)
        summary = _summary_stats(residuals)
        summary["verdict"] = result.verdict
        summary["test_label"] = test
    elif test == "solve":
        worst = []
        for pt in points:
            try:
                rep = solve_hyperosculating(pt[0], pt[1], provider(*pt), theta)
                roots = [
                    {"u": r.u, "v": r.v, "circle_residual": r.c1_residual,
                     "cubic_residual": r.c2_residual, "order4_residual": r.c3_residual,
                     "jacobian": r.jacobian, "multiple": r.multiple,
                     "at_infinity": r.at_infinity}
                    for r in rep.roots
                ]
                records.append({"x": pt[0], "y": pt[1], "roots": roots,
                                "identically_zero": rep.identically_zero,
                                "degenerate_leading": rep.degenerate_leading, "error": None})
                if roots:
                    worst.append(min(abs(r["order4_residual"]) for r in roots))
            except ConeFlankError as exc:
                records.append({"x": pt[0], "y": pt[1], "roots": [], "error": str(exc)})
        summary = _summary_stats(worst)
        ok = all(r["error"] is None for r in records)
        summary["verdict"] = "holds" if ok else "fails"
        summary["test_label"] = "solve"
    elif test == "cones":
        bounds = ToolBounds(*config["bounds"]) if "bounds" in config else None
        any_empty = False
        for pt in points:
            try:
                built = build_cone_at(pt[0], pt[1], provider, theta, bounds)
                cones = []
                for spec in built.cones:
                    vertex = spec.vertex
                    axis = spec.axis
                    contact = spec.contact_point
                    if scene is not None:
                        vertex = scene.to_world_point(vertex)
                        axis = scene.to_world_vector(axis)
                        contact = scene.to_world_point(contact)
                    cones.append({
                        "vertex": [float(v) for v in vertex],
                        "axis": [float(v) for v in axis],
                        "theta": spec.theta,
                        "contact_point": [float(v) for v in contact],
                        "side": spec.side,
                        "tangency_radius": spec.tangency_radius,
                        "feasible": spec.feasible,
                        "order4_residual": spec.c3_residual,
                    })
                    residuals.append(abs(spec.c3_residual))
                if not cones:
                    any_empty = True
                records.append({"x": pt[0], "y": pt[1], "cones": cones,
                                "dropped": [reason for _, reason in built.dropped], "error": None})
            except ConeFlankError as exc:
                records.append({"x": pt[0], "y": pt[1], "cones": [], "error": str(exc)})
                any_empty = True
        summary = _summary_stats(residuals)
        summary["verdict"] = "fails" if any_empty else "holds"
        summary["test_label"] = "cones"
    else:
        raise ConfigError(f"unknown test {test!r}")

    provenance = {
        "input_sha256": _canonical_hash(config),
        "config": config,
        "version": PACKAGE_VERSION,
    }
    tool_rec = {"theta": theta, "radius": radius, "orientation": orientation}
    return Report(REPORT_SCHEMA, test, tool_rec, records, summary, provenance)


# ---------------------------------------------------------------------------
# Exact-envelope sampler and the stability experiment
# ---------------------------------------------------------------------------


def sample_exact_envelope(expr, grid=(80, 80), domain=(-2.2, 2.2, -2.2, 2.2),
                          min_r2=0.25, max_r2=None):
    """Oriented design-space samples of the surface whose plane image is expr.

    Positions are reconstructed contact points; normals come straight from
    the inverse stereographic map (this is exactly a tangent-plane
    sampling of the envelope).
    """
    ast = parse_expression(expr) if isinstance(expr, str) else expr
    x0, x1, y0, y1 = domain
    nx, ny = grid
    out = []
    for i in range(nx):
        x = x0 + (x1 - x0) * (i / (nx - 1))
        for k in range(ny):
            y = y0 + (y1 - y0) * (k / (ny - 1))
            r2 = x * x + y * y
            if r2 < min_r2 or (max_r2 is not None and r2 > max_r2):
                continue
            jet = jet_of_expression(ast, x, y)
            pos = isotropic_to_contact_point(x, y, jet.f, jet.fx, jet.fy)
            out.append(SurfaceSample(pos, inverse_stereographic(x, y)))
    return out


@dataclass
class StabilityResult:
    noise_levels: tuple
    median_angular_errors: list
    cones_per_point: list  # list (per level) of lists (per point) of cone counts
    records: dict


def stability_experiment(noise_levels=(0.0, 0.01, 0.05, 0.1), seed=2024,
                         theta=math.pi / 6.0, n_points=8, point_radius=1.2,
                         grid=(160, 160), fit_k=800, fit_degree=6,
                         bandwidth_factor=1.0) -> StabilityResult:
    """Recover exact-envelope generators from increasingly noisy normals.

    The reference surface is the standard exact envelope whose generators
    have top views of radius cot(theta)/2 through the origin. At noise 0
    the exact expression jets are used (the perturbation-free reference
    path); positive noise goes through sampling, normal perturbation, and
    the scattered quartic fit. Reported per level: the median angular
    error of the recovered generator directions and the number of cone
    candidates at each test point.
    """
    expr = "y^2/(x^2+y^2)"
    ast = parse_expression(expr)
    cot = 1.0 / math.tan(theta)
    # two exact generator directions at each test point
    test_points = []
    exact_roots = []
    for k in range(n_points):
        ang = 0.37 + 2.0 * math.pi * k / n_points
        p = np.array([point_radius * math.cos(ang), point_radius * math.sin(ang)])
        w = math.sqrt(cot * cot - point_radius**2)
        phat = p / point_radius
        that = np.array([-phat[1], phat[0]])
        roots = [tuple(-0.5 * point_radius * phat + s * 0.5 * w * that) for s in (+1.0, -1.0)]
        test_points.append(tuple(p))
        exact_roots.append(roots)

    medians = []
    cones_counts = []
    records = {}
    for level_idx, r in enumerate(noise_levels):
        if r == 0.0:
            provider = lambda x, y: jet_of_expression(ast, x, y)
        else:
            samples = sample_exact_envelope(ast, grid=grid, min_r2=0.2, max_r2=7.0)
            noisy = perturb_normals(samples, PerturbSpec(r, seed + level_idx))
            iso = []
            for s in noisy:
                if s.n[2] > -0.9:
                    iso.append(sample_to_isotropic(s))
            cfg = ScatterFitConfig(k=fit_k, bandwidth_factor=bandwidth_factor,
                                   degree=fit_degree, condition_cap=None)
            provider = scattered_jet_provider(iso, cfg)

        errors = []
        counts = []
        for pt, exact in zip(test_points, exact_roots):
            jet = provider(*pt)
            cones = build_cone_candidates(pt[0], pt[1], jet, theta)
            counts.append(len(cones))
            rep = solve_hyperosculating(pt[0], pt[1], jet, theta)
            directions = [(rec.u, rec.v) for rec in rep.roots]
            if not directions:
                directions = [(spec.conic.u, spec.conic.v) for spec in cones]
            for uv in exact:
                best = None
                for cand in directions:
                    err = _angle_between_uv(cand, uv)
                    if best is None or err < best:
                        best = err
                errors.append(best if best is not None else math.pi)
        medians.append(float(np.median(errors)))
        cones_counts.append(counts)
        records[r] = {"errors": errors, "counts": counts}
    return StabilityResult(tuple(noise_levels), medians, cones_counts, records)


def _angle_between_uv(a, b):
    na = math.hypot(*a)
    nb = math.hypot(*b)
    if na == 0.0 or nb == 0.0:
        return math.pi
    cosv = (a[0] * b[0] + a[1] * b[1]) / (na * nb)
    return math.acos(max(-1.0, min(1.0, cosv)))
