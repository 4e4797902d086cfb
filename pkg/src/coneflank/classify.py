"""Per-point and per-field surface classification.

Each test evaluates a closed-form condition on the 4-jet of the
plane-image graph: developability (vanishing curvature numerator), ruled
surfaces (asymptotic/cubic resultant), cone envelopes (hyperosculation
residual), cylinder envelopes (offsets of ruled surfaces), channel and
pipe surfaces (sphere envelopes). The cylinder/channel/pipe conditions are
necessary only; their verdicts carry necessary_only = True.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contact import (
    SolveTolerances,
    hyper_residual,
    order4_residual,
    solve_hyperosculating,
    _hyper_residual_scale,
)
from .errors import ConfigError, DegenerateLine
from .isomap import inverse_stereographic, isotropic_to_contact_point
from .jets import Jet4
from .rootfind import real_roots


@dataclass(frozen=True)
class ClassVerdict:
    label: str
    residual: float
    witness: tuple | None = None
    necessary_only: bool = False
    details: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return not self.label.startswith("not-")


@dataclass(frozen=True)
class ToolParams:
    """Cone opening angle (radians) or cylinder/sphere radius, plus orientation."""

    theta: float | None = None
    radius: float | None = None
    orientation: str = "inward"

    def __post_init__(self):
        if self.theta is not None and not (0.0 < self.theta < 0.5 * math.pi):
            raise ValueError("theta must be in (0, pi/2)")
        if self.radius is not None and self.radius <= 0.0:
            raise ValueError("radius must be positive")
        if self.orientation not in ("inward", "outward"):
            raise ValueError("orientation must be 'inward' or 'outward'")

    def signed_radius(self) -> float:
        return self.radius if self.orientation == "inward" else -self.radius


# ---------------------------------------------------------------------------
# Developable / ruled
# ---------------------------------------------------------------------------


def developable_residual(j: Jet4) -> float:
    """Numerator of the Gaussian curvature of the graph; zero iff developable."""
    return j.fxx * j.fyy - j.fxy * j.fxy


def _ruled_resultant(j: Jet4):
    """Resultant of the asymptotic-direction quadratic and directional cubic.

    Returns (value, scale) with scale the cancellation-free term bound.
    """
    fxx, fxy, fyy = j.fxx, j.fxy, j.fyy
    fxxx, fxxy, fxyy, fyyy = j.fxxx, j.fxxy, j.fxyy, j.fyyy
    terms = [
        fyy**3 * fxxx**2,
        6.0 * fyy * fxxx * fyyy * fxy * fxx,
        -6.0 * fyy**2 * fxxx * fxyy * fxx,
        -6.0 * fyyy * fxy * fxx**2 * fxyy,
        9.0 * fyy * fxyy**2 * fxx**2,
        -6.0 * fxy * fyy**2 * fxxy * fxxx,
        12.0 * fxy**2 * fxxy * fyyy * fxx,
        -18.0 * fxy * fyy * fxxy * fxyy * fxx,
        12.0 * fyy * fxyy * fxy**2 * fxxx,
        -8.0 * fyyy * fxy**3 * fxxx,
        9.0 * fxx * fyy**2 * fxxy**2,
        -6.0 * fyy * fxxy * fyyy * fxx**2,
        fyyy**2 * fxx**3,
    ]
    return sum(terms), sum(abs(t) for t in terms)


def _binary_quadratic_directions(a, b, c):
    """Unit direction solutions of a*u^2 + b*u*v + c*v^2 = 0.

    Returns ("all", []) when the form vanishes identically, otherwise
    ("some", [(u, v), ...]) with zero, one, or two unit directions.
    """
    scale = abs(a) + abs(b) + abs(c)
    if scale == 0.0 or max(abs(a), abs(b), abs(c)) <= 1e-14 * scale:
        return "all", []
    disc = b * b - 4.0 * a * c
    if disc < -1e-14 * scale * scale:
        return "some", []
    disc = max(disc, 0.0)
    sq = math.sqrt(disc)
    dirs = []
    for sign in (1.0, -1.0):
        # pick the representation with the larger norm to avoid cancellation
        d1 = (-b + sign * sq, 2.0 * a)
        d2 = (2.0 * c, -b - sign * sq)
        d = d1 if math.hypot(*d1) >= math.hypot(*d2) else d2
        n = math.hypot(*d)
        if n == 0.0:
            continue
        d = (d[0] / n, d[1] / n)
        if d[0] < 0.0 or (d[0] == 0.0 and d[1] < 0.0):
            d = (-d[0], -d[1])
        if not any(math.hypot(d[0] - e[0], d[1] - e[1]) < 1e-9 for e in dirs):
            dirs.append(d)
    return "some", dirs


def _ruled_cubic(j: Jet4, u, v):
    return j.fxxx * u**3 + 3.0 * j.fxxy * u * u * v + 3.0 * j.fxyy * u * v * v + j.fyyy * v**3


def _ruled_cubic_scale(j: Jet4):
    return abs(j.fxxx) + 3.0 * abs(j.fxxy) + 3.0 * abs(j.fxyy) + abs(j.fyyy)


def asymptotic_directions(j: Jet4):
    """Unit directions of vanishing normal curvature ('all' when the Hessian is zero)."""
    return _binary_quadratic_directions(j.fxx, 2.0 * j.fxy, j.fyy)


def ruled_test(j: Jet4, resultant_tol=1e-8, cubic_tol=1e-8) -> ClassVerdict:
    """Ruled iff the resultant vanishes and the curvature numerator is <= 0.

    The witness directions are common real roots of the asymptotic
    quadratic and the directional cubic.
    """
    res, res_scale = _ruled_resultant(j)
    residual = abs(res) / (res_scale + 1e-300) if res_scale > 0 else 0.0
    k = developable_residual(j)
    k_scale = (abs(j.fxx) + abs(j.fxy) + abs(j.fyy)) ** 2
    k_ok = k <= 1e-12 * max(k_scale, 1e-300) or k <= 0.0

    kind, dirs = asymptotic_directions(j)
    c_scale = _ruled_cubic_scale(j)
    witnesses = []
    if kind == "all":
        witnesses = [(1.0, 0.0), (0.0, 1.0)]
    else:
        for d in dirs:
            if abs(_ruled_cubic(j, *d)) <= cubic_tol * max(c_scale, 1e-300) + 1e-300:
                witnesses.append(d)

    ruled = residual <= resultant_tol and k_ok and (kind == "all" or bool(witnesses))
    label = "ruled" if ruled else "not-ruled"
    witness = witnesses[0] if witnesses else None
    return ClassVerdict(label, residual, witness, False, {"curvature_numerator": k, "witnesses": witnesses})


# ---------------------------------------------------------------------------
# Cone envelope
# ---------------------------------------------------------------------------


def cone_envelope_test(x, y, j: Jet4, tool: ToolParams, accept_tol=1e-6,
                       solve_tol: SolveTolerances | None = None) -> ClassVerdict:
    """Minimum fourth-order residual over the hyperosculating directions.

    Zero residual means a direction with at least fourth-order plane
    contact exists, the pointwise necessary condition for an exact
    envelope of congruent cones of this opening angle. The two-sided
    statement additionally needs a nonmultiple, continuously chosen root;
    the witness's Jacobian value is attached for that judgement.
    """
    if tool.theta is None:
        raise ConfigError("cone test needs tool theta")
    report = solve_hyperosculating(x, y, j, tool.theta, solve_tol)
    if report.identically_zero:
        pts = report.family_points(64)
        vals = [abs(order4_residual(j, u, v)) for u, v in pts]
        i = int(np.argmin(vals)) if vals else 0
        residual = vals[i] if vals else 0.0
        witness = pts[i] if pts else None
        label = "cone-envelope" if residual <= accept_tol else "not-cone-envelope"
        return ClassVerdict(label, residual, witness, False,
                            {"identically_zero": True, "jacobian": 0.0, "n_roots": 0})
    if not report.roots:
        return ClassVerdict("not-cone-envelope", float("inf"), None, False,
                            {"identically_zero": False, "n_roots": 0,
                             "degenerate_leading": report.degenerate_leading})
    best = min(report.roots, key=lambda r: abs(r.c3_residual))
    residual = abs(best.c3_residual)
    label = "cone-envelope" if residual <= accept_tol else "not-cone-envelope"
    return ClassVerdict(label, residual, (best.u, best.v), False,
                        {"jacobian": best.jacobian, "multiple": best.multiple,
                         "n_roots": len(report.roots),
                         "degenerate_leading": report.degenerate_leading})


# ---------------------------------------------------------------------------
# Cylinder envelope (offsets of ruled surfaces)
# ---------------------------------------------------------------------------


def _plane_condition(x, y, j: Jet4, u, v, signed_radius):
    """Conic-plane-through-(0,0,R) condition; homogeneous quadratic in (u, v)."""
    rho = x * x + y * y + 1.0
    g = j.f - x * j.fx - y * j.fy - signed_radius
    return 2.0 * (u * u + v * v) * g + rho * (j.fxx * v * v - 2.0 * j.fxy * u * v + j.fyy * u * u)


def cylinder_envelope_test(x, y, j: Jet4, tool: ToolParams, cubic_touch_rel=1e-4) -> ClassVerdict:
    """Necessary condition for an envelope of congruent cylinders of radius R.

    The great-circle condition restricts (u, v) to a line; the cubic
    restricted to that line picks candidate points; the residual is the
    smallest plane-condition value among them. Points where the restricted
    cubic merely dips to cubic_touch_rel of its term scale also count as
    candidates: tangential roots are common on symmetric surfaces and fit
    noise pushes them off the real axis.
    """
    if tool.radius is None:
        raise ConfigError("cylinder test needs tool radius")
    r_signed = tool.signed_radius()
    xy2 = x * x + y * y
    if xy2 < 1e-18:
        raise DegenerateLine("top view at the origin: the great-circle line is empty")
    rho = xy2 + 1.0
    p0 = (-rho * x / (2.0 * xy2), -rho * y / (2.0 * xy2))
    d = (-y, x)

    def on_line(s):
        return p0[0] + s * d[0], p0[1] + s * d[1]

    def cubic_at(s):
        return hyper_residual(j, *on_line(s))

    g0 = cubic_at(0.0)
    g1 = cubic_at(1.0)
    gm1 = cubic_at(-1.0)
    g2 = cubic_at(2.0)
    k0 = g0
    k2 = 0.5 * (g1 + gm1) - k0
    s13 = 0.5 * (g1 - gm1)            # k1 + k3
    k3 = ((g2 - k0 - 4.0 * k2) * 0.5 - s13) / 3.0
    k1 = s13 - k3

    cubic_scale = max(_hyper_residual_scale(j, *on_line(s)) for s in (0.0, 1.0, -1.0, 2.0))
    coeffs = [k0, k1, k2, k3]
    if max(abs(c) for c in coeffs) <= 1e-10 * (cubic_scale + 1e-300):
        # cubic vanishes on the whole line: minimize |plane condition| directly
        h0 = _plane_condition(x, y, j, *p0, r_signed)
        h1 = _plane_condition(x, y, j, *on_line(1.0), r_signed)
        hm1 = _plane_condition(x, y, j, *on_line(-1.0), r_signed)
        q2 = 0.5 * (h1 + hm1) - h0
        q1 = 0.5 * (h1 - hm1)
        roots = real_roots([h0, q1, q2])
        if roots:
            s_best = roots[0]
            residual = abs(_plane_condition(x, y, j, *on_line(s_best), r_signed))
        elif abs(q2) > 0.0:
            s_best = -q1 / (2.0 * q2)
            residual = abs(h0 + q1 * s_best + q2 * s_best * s_best)
        else:
            s_best = 0.0
            residual = abs(h0)
        witness = on_line(s_best)
        return ClassVerdict("cylinder-envelope" if residual <= 1e-8 else "not-cylinder-envelope",
                            residual, witness, True, {"cubic_identically_zero": True})

    candidates = list(real_roots(coeffs))
    # near-roots: critical points where the cubic dips to noise level
    for s in real_roots([k1, 2.0 * k2, 3.0 * k3]):
        val = k0 + s * (k1 + s * (k2 + s * k3))
        if abs(val) <= cubic_touch_rel * (cubic_scale + 1e-300):
            candidates.append(s)
    best = None
    for s in candidates:
        u, v = on_line(s)
        val = abs(_plane_condition(x, y, j, u, v, r_signed))
        if best is None or val < best[0]:
            best = (val, (u, v))
    if best is None:
        return ClassVerdict("not-cylinder-envelope", float("inf"), None, True,
                            {"cubic_identically_zero": False, "n_line_roots": 0})
    residual, witness = best
    return ClassVerdict("cylinder-envelope" if residual <= 1e-8 else "not-cylinder-envelope",
                        residual, witness, True, {"cubic_identically_zero": False})


# ---------------------------------------------------------------------------
# Channel / pipe (sphere envelopes)
# ---------------------------------------------------------------------------


def _tangent_cone_form(j: Jet4):
    """Coefficients (a, b, c) of (fxx-fyy) uv + fxy (v^2 - u^2) as a u,v-quadratic."""
    return -j.fxy, j.fxx - j.fyy, j.fxy


def channel_test(j: Jet4, tol=1e-8) -> ClassVerdict:
    """Necessary condition for an envelope of spheres of varying radius.

    The tangent-cone quadratic and the pure third-order cubic must share a
    nonzero real direction; the residual is their binary-form resultant
    normalized by the coefficient infinity-norms.
    """
    a, b, c = _tangent_cone_form(j)
    d3 = -j.fyyy
    e3 = 3.0 * j.fxyy
    f3 = -3.0 * j.fxxy
    g3 = j.fxxx
    sylv = np.array(
        [
            [a, b, c, 0.0, 0.0],
            [0.0, a, b, c, 0.0],
            [0.0, 0.0, a, b, c],
            [d3, e3, f3, g3, 0.0],
            [0.0, d3, e3, f3, g3],
        ]
    )
    res = float(np.linalg.det(sylv))
    # Bombieri norms: rotation-invariant, so the normalized residual does not
    # depend on the orientation of the (u, v) frame
    n2 = math.sqrt(a * a + b * b / 2.0 + c * c)
    n3 = math.sqrt(d3 * d3 + e3 * e3 / 3.0 + f3 * f3 / 3.0 + g3 * g3)
    if n2 == 0.0 or n3 == 0.0:
        residual = 0.0
    else:
        residual = abs(res) / (n2**3 * n3**2)

    kind, dirs = _binary_quadratic_directions(a, b, c)
    witness = None
    c_scale = _ruled_cubic_scale(j) + 1e-300
    if kind == "all":
        # every direction solves the quadratic; take a real root of the cubic
        roots = real_roots([g3, f3, e3, d3])  # cubic in s = u/v
        if n3 == 0.0:
            witness = (1.0, 1.0)
        elif roots:
            s = roots[0]
            n = math.hypot(s, 1.0)
            witness = (s / n, 1.0 / n)
        elif abs(d3) <= 1e-14 * c_scale:
            witness = (1.0, 0.0)
    else:
        best = None
        for dd in dirs:
            val = abs(_channel_cubic(j, *dd))
            if best is None or val < best[0]:
                best = (val, dd)
        if best is not None and best[0] <= 1e-6 * c_scale + 1e-300:
            witness = best[1]
    label = "channel" if residual <= tol and witness is not None else "not-channel"
    return ClassVerdict(label, residual, witness, True, {"resultant": res})


def _channel_cubic(j: Jet4, u, v):
    return j.fxxx * v**3 - 3.0 * j.fxxy * v * v * u + 3.0 * j.fxyy * v * u * u - j.fyyy * u**3


def pipe_test(x, y, j: Jet4, tool: ToolParams, tol=1e-8) -> ClassVerdict:
    """Necessary condition for an envelope of congruent spheres of radius R.

    Seeks a common nonzero real solution of the plane condition and the
    tangent-cone quadratic; both are homogeneous quadratics, so directions
    suffice and the residual is evaluated at unit scale.
    """
    if tool.radius is None:
        raise ConfigError("pipe test needs tool radius")
    r_signed = tool.signed_radius()
    kind, dirs = _binary_quadratic_directions(*_tangent_cone_form(j))
    if kind == "all":
        # plane condition restricted to the unit circle is a quadratic form
        rho = x * x + y * y + 1.0
        g = j.f - x * j.fx - y * j.fy - r_signed
        m11 = 2.0 * g + rho * j.fyy
        m22 = 2.0 * g + rho * j.fxx
        m12 = -rho * j.fxy
        tr = m11 + m22
        det = m11 * m22 - m12 * m12
        disc = math.sqrt(max(0.25 * tr * tr - det, 0.0))
        lam1, lam2 = 0.5 * tr - disc, 0.5 * tr + disc
        if lam1 <= 0.0 <= lam2:
            residual = 0.0
        else:
            residual = min(abs(lam1), abs(lam2))
        witness = None
    else:
        best = None
        for d in dirs:
            val = abs(_plane_condition(x, y, j, d[0], d[1], r_signed))
            if best is None or val < best[0]:
                best = (val, d)
        if best is None:
            return ClassVerdict("not-pipe", float("inf"), None, True, {})
        residual, witness = best
    label = "pipe" if residual <= tol else "not-pipe"
    return ClassVerdict(label, residual, witness, True, {})


# ---------------------------------------------------------------------------
# Millability
# ---------------------------------------------------------------------------


def millability_check(j: Jet4, delta=1e-4, flat_tol=1e-7) -> str:
    """Sign of the design-space Gaussian curvature at the jet's point.

    'penetrates': positive curvature, an enveloping cone cuts into the
    material; 'candidate': negative curvature; 'excluded-zero-curvature':
    the reconstructed patch is degenerate (the graph model assumption
    fails). Computed from a five-point stencil of reconstructed contact
    points around the jet's base point.
    """
    x, y = j.x, j.y

    def contact(px, py):
        f, fx, fy = j.eval_shifted(px, py)
        return isotropic_to_contact_point(px, py, f, fx, fy)

    rx = (contact(x + delta, y) - contact(x - delta, y)) / (2.0 * delta)
    ry = (contact(x, y + delta) - contact(x, y - delta)) / (2.0 * delta)
    n = inverse_stereographic(x, y)
    k_num = float(np.dot(np.cross(rx, ry), n))
    scale = float(np.linalg.norm(rx) * np.linalg.norm(ry))
    if abs(k_num) <= flat_tol * max(scale, 1e-300):
        return "excluded-zero-curvature"
    return "penetrates" if k_num > 0.0 else "candidate"


# ---------------------------------------------------------------------------
# Field aggregation
# ---------------------------------------------------------------------------

_POINT_TESTS = ("cone", "cylinder", "channel", "pipe", "developable", "ruled")


@dataclass
class FieldResult:
    test: str
    points: list
    residuals: list
    verdicts: list
    errors: list
    p95: float
    verdict: str


def classify_field(jet_provider, tool: ToolParams | None, grid_points, test: str,
                   field_tol=1e-6) -> FieldResult:
    """Run one per-point test over a grid; global verdict from the p95 residual.

    Per-node errors are recorded, not fatal. Raises ConfigError for an
    empty grid or an unknown test name.
    """
    if test not in _POINT_TESTS:
        raise ConfigError(f"unknown test {test!r}; choose from {_POINT_TESTS}")
    pts = list(grid_points)
    if not pts:
        raise ConfigError("empty grid")
    residuals = []
    verdicts = []
    errors = []
    for x, y in pts:
        try:
            jet = jet_provider(x, y)
            if test == "cone":
                verdict = cone_envelope_test(x, y, jet, tool)
            elif test == "cylinder":
                verdict = cylinder_envelope_test(x, y, jet, tool)
            elif test == "channel":
                verdict = channel_test(jet)
            elif test == "pipe":
                verdict = pipe_test(x, y, jet, tool)
            elif test == "developable":
                r = abs(developable_residual(jet))
                verdict = ClassVerdict("developable" if r <= field_tol else "not-developable", r)
            else:
                verdict = ruled_test(jet)
            residuals.append(verdict.residual)
            verdicts.append(verdict)
            errors.append(None)
        except Exception as exc:  # per-node failures are data, not crashes
            residuals.append(float("nan"))
            verdicts.append(None)
            errors.append(f"{type(exc).__name__}: {exc}")
    finite = [r for r in residuals if math.isfinite(r)]
    if not finite:
        p95 = float("inf")
    else:
        p95 = float(np.percentile(np.array(finite), 95))
    verdict = "holds" if p95 <= field_tol and finite else "fails"
    return FieldResult(test, pts, residuals, verdicts, errors, p95, verdict)
