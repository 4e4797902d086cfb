"""Back from the plane model to design space: cones, rulings, traced conics.

The vertex of a candidate cone comes from the closed form below (the conic
must lie on the image of a point sphere); the axis from the fact that the
cone's normals make a fixed angle with it; the side flag from a single
dot-product test. Ruling and conic traces are integral curves of the
respective direction fields, integrated with fixed-step fourth-order
Runge-Kutta and verified after the fact by straightness or circularity
reports rather than by adaptive control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classify import asymptotic_directions, developable_residual
from .contact import (
    ConicCandidate,
    SolveReport,
    SolveTolerances,
    _theta_residual_scale,
    circle_condition_gradient,
    hyper_gradient,
    hyper_residual,
    hyper_scale_floored,
    multiplicity_jacobian,
    order4_residual,
    osculation_coeffs,
    solve_hyperosculating,
    theta_residual,
)
from .errors import (
    AmbiguousSide,
    BranchJump,
    ConeFlankError,
    DegenerateDenominator,
    InvalidBounds,
    MultipleRoot,
    NoRealRuling,
    RootLost,
    SingularSystem,
    ZeroHessian,
)
from .isomap import inverse_stereographic, isotropic_to_contact_point
from .jets import Jet4


@dataclass(frozen=True)
class ToolBounds:
    """Truncation distances of the physical tool, measured from the vertex."""

    r_min: float
    r_max: float

    def __post_init__(self):
        if not (0.0 <= self.r_min < self.r_max):
            raise InvalidBounds(f"need 0 <= r_min < r_max, got [{self.r_min}, {self.r_max}]")


@dataclass(frozen=True)
class ConeSpec:
    """Reconstructed design-space cone tangent to the surface along a circle."""

    vertex: np.ndarray
    axis: np.ndarray
    theta: float
    contact_point: np.ndarray
    side: int                      # +1: borders on the +normal side, -1: opposite
    tangency_radius: float
    feasible: bool | None
    c3_residual: float
    jacobian: float
    conic: ConicCandidate


@dataclass
class CurveTrace:
    points: list
    step_size: float
    f_values: list
    reports: dict = field(default_factory=dict)


@dataclass
class BuildResult:
    cones: list
    dropped: list
    report: SolveReport


# ---------------------------------------------------------------------------
# Cone geometry from a conic candidate
# ---------------------------------------------------------------------------


def cone_vertex(c: ConicCandidate) -> np.ndarray:
    """Apex of the cone whose plane-model image is the conic."""
    x, y, z, u, v, a, b = c.x, c.y, c.z, c.u, c.v, c.a, c.b
    uv2 = u * u + v * v
    s = x * x + y * y + 1.0 + 2.0 * u * x + 2.0 * v * y
    den = uv2 * s
    den_scale = uv2 * (x * x + y * y + 1.0 + 2.0 * abs(u * x) + 2.0 * abs(v * y)) + 1e-300
    if uv2 < 1e-18 or abs(den) < 1e-12 * den_scale:
        raise DegenerateDenominator(f"vertex denominator {den:.3e} vanishes")
    av_bu = a * v + b * u
    bv_au = b * v - a * u
    m1 = (x * x - y * y - 1.0) * av_bu + 2.0 * x * y * bv_au - 2.0 * uv2 * (u * z + x * z + a * y)
    m2 = (y * y - x * x - 1.0) * bv_au + 2.0 * x * y * av_bu - 2.0 * uv2 * (v * z + y * z - a * x)
    m3 = 2.0 * x * av_bu + 2.0 * y * bv_au - 2.0 * uv2 * z
    return np.array([m1, m2, m3]) / den


def cone_axis(c: ConicCandidate, probes=(0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0)) -> np.ndarray:
    """Axis direction from three normals along the conic's top view.

    Every normal of the cone makes the angle pi/2 - theta with the axis,
    so three probe normals pin it down linearly.
    """
    rows = []
    for t in probes:
        px, py = c.top_view(t)
        rows.append(inverse_stereographic(px, py))
    mat = np.array(rows)
    if abs(np.linalg.det(mat)) < 1e-12:
        raise SingularSystem("probe normals nearly coplanar with the origin")
    rhs = np.full(3, math.sin(c.theta))
    axis = np.linalg.solve(mat, rhs)
    norm = float(np.linalg.norm(axis))
    if norm == 0.0:
        raise SingularSystem("zero axis solution")
    return axis / norm


def axis_residual(c: ConicCandidate, axis, n_probes=16) -> float:
    """max |n(t).axis - sin(theta)| over the conic (zero for an exact cone)."""
    target = math.sin(c.theta)
    worst = 0.0
    for k in range(n_probes):
        t = 2.0 * math.pi * k / n_probes
        n = inverse_stereographic(*c.top_view(t))
        worst = max(worst, abs(float(np.dot(n, axis)) - target))
    return worst


def cone_side(c: ConicCandidate, m, r) -> int:
    """+1 when the cone borders the tangent plane on the +normal side, else -1."""
    xp, yp = c.x + 2.0 * c.u, c.y + 2.0 * c.v
    n = inverse_stereographic(xp, yp)
    rm = np.asarray(r, dtype=float) - np.asarray(m, dtype=float)
    dot = float(np.dot(n, rm))
    if abs(dot) < 1e-10 * float(np.linalg.norm(rm)) + 1e-300:
        raise AmbiguousSide("grazing configuration")
    return 1 if dot > 0.0 else -1


def tool_length_check(m, r, bounds: ToolBounds) -> bool:
    """True when the vertex-to-contact distance fits the truncated tool."""
    dist = float(np.linalg.norm(np.asarray(m, dtype=float) - np.asarray(r, dtype=float)))
    return bounds.r_min <= dist <= bounds.r_max


def build_cone_at(x, y, jets, tool_theta, bounds: ToolBounds | None = None,
                  solve_tol: SolveTolerances | None = None) -> BuildResult:
    """All cone placements with third-order plane contact at one point.

    jets may be a Jet4 or a provider callable. Roots that fail a
    reconstruction step are dropped with the reason recorded; the returned
    cones are sorted by fourth-order residual (best candidates first).
    """
    jet = jets(x, y) if callable(jets) else jets
    report = solve_hyperosculating(x, y, jet, tool_theta, solve_tol)
    result = BuildResult([], [], report)
    if report.identically_zero:
        result.dropped.append((None, "identically-zero: every direction is hyperosculating"))
        return result
    r = isotropic_to_contact_point(x, y, jet.f, jet.fx, jet.fy)
    for root in report.roots:
        conic = ConicCandidate.from_jet(x, y, jet, root.u, root.v, tool_theta)
        try:
            m = cone_vertex(conic)
            axis = cone_axis(conic)
            side = cone_side(conic, m, r)
        except ConeFlankError as exc:
            result.dropped.append((root, f"{type(exc).__name__}: {exc}"))
            continue
        if float(np.dot(axis, r - m)) < 0.0:
            axis = -axis  # orient into the nappe holding the contact circle
        dist = float(np.linalg.norm(r - m))
        feasible = tool_length_check(m, r, bounds) if bounds is not None else None
        result.cones.append(
            ConeSpec(
                vertex=m,
                axis=axis,
                theta=tool_theta,
                contact_point=r,
                side=side,
                tangency_radius=dist * math.sin(tool_theta),
                feasible=feasible,
                c3_residual=root.c3_residual,
                jacobian=root.jacobian,
                conic=conic,
            )
        )
    result.cones.sort(key=lambda spec: abs(spec.c3_residual))
    return result


def build_cone_candidates(x, y, jets, tool_theta, n_best=6,
                          bounds: ToolBounds | None = None) -> list:
    """Up to n_best candidate cones from the direction scan.

    Unlike build_cone_at this never loses candidates to noise: directions
    where the cubic merely dips (a root pair pushed off the real axis by
    measurement error) still produce a cone, with the fourth-order residual
    recording how approximate it is. This is the initialization-oriented
    entry point for measured data.
    """
    from .contact import candidate_directions

    jet = jets(x, y) if callable(jets) else jets
    r = isotropic_to_contact_point(x, y, jet.f, jet.fx, jet.fy)
    cones = []
    for u, v, _ in candidate_directions(x, y, jet, tool_theta, n_best=n_best):
        conic = ConicCandidate.from_jet(x, y, jet, u, v, tool_theta)
        try:
            m = cone_vertex(conic)
            axis = cone_axis(conic)
            side = cone_side(conic, m, r)
        except ConeFlankError:
            continue
        if float(np.dot(axis, r - m)) < 0.0:
            axis = -axis
        dist = float(np.linalg.norm(r - m))
        cones.append(ConeSpec(
            vertex=m, axis=axis, theta=tool_theta, contact_point=r, side=side,
            tangency_radius=dist * math.sin(tool_theta),
            feasible=tool_length_check(m, r, bounds) if bounds is not None else None,
            c3_residual=order4_residual(jet, u, v),
            jacobian=multiplicity_jacobian(x, y, jet, u, v, tool_theta),
            conic=conic,
        ))
    return cones


# ---------------------------------------------------------------------------
# Trace reports
# ---------------------------------------------------------------------------


def _fit_line_deviation(points):
    pts = np.asarray(points)
    centroid = pts.mean(axis=0)
    d = pts - centroid
    _, _, vt = np.linalg.svd(d, full_matrices=False)
    direction = vt[0]
    residual = d - np.outer(d @ direction, direction)
    return float(np.max(np.linalg.norm(residual, axis=1)))


def _fit_circle(points):
    pts = np.asarray(points)
    a = np.column_stack([2.0 * pts[:, 0], 2.0 * pts[:, 1], np.ones(len(pts))])
    b = pts[:, 0] ** 2 + pts[:, 1] ** 2
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    cx, cy, c0 = sol
    radius = math.sqrt(max(c0 + cx * cx + cy * cy, 0.0))
    deviation = float(np.max(np.abs(np.linalg.norm(pts - np.array([cx, cy]), axis=1) - radius)))
    return (cx, cy), radius, deviation


def _rk4(p, h, f):
    k1 = f(p)
    k2 = f(p + 0.5 * h * k1)
    k3 = f(p + 0.5 * h * k2)
    k4 = f(p + h * k3)
    return p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# ---------------------------------------------------------------------------
# Developable rulings
# ---------------------------------------------------------------------------


def integrate_ruling_developable(jets, seed, step=1e-2, length=1.0) -> CurveTrace:
    """Integrate the kernel direction of the Hessian from the seed.

    On a developable graph the integral curve is a straight segment with a
    constant tangent plane; the trace reports quantify both.
    """
    state = {"prev": None}

    def direction(p):
        j = jets(p[0], p[1])
        h = np.array([[j.fxx, j.fxy], [j.fxy, j.fyy]])
        scale = float(np.max(np.abs(h)))
        if scale < 1e-12 * j.scale():
            raise ZeroHessian(f"all second partials vanish near {tuple(p)}")
        w, vec = np.linalg.eigh(h)
        d = vec[:, int(np.argmin(np.abs(w)))]
        if state["prev"] is not None and float(np.dot(d, state["prev"])) < 0.0:
            d = -d
        state["prev"] = d
        return d

    p = np.asarray(seed, dtype=float)
    n_steps = max(2, int(round(length / step)))
    points = [p.copy()]
    f_vals = []
    grads = []
    j0 = jets(p[0], p[1])
    f_vals.append(j0.f)
    grads.append((j0.fx, j0.fy))
    for _ in range(n_steps):
        p = _rk4(p, step, direction)
        j = jets(p[0], p[1])
        points.append(p.copy())
        f_vals.append(j.f)
        grads.append((j.fx, j.fy))
    straightness = _fit_line_deviation(points)
    g0 = grads[0]
    tangent_var = max(math.hypot(g[0] - g0[0], g[1] - g0[1]) for g in grads)
    return CurveTrace(points, step, f_vals,
                      {"straightness": straightness, "tangent_variation": tangent_var})


# ---------------------------------------------------------------------------
# Rulings of non-developable ruled surfaces
# ---------------------------------------------------------------------------


def integrate_ruling_ruled(jets, seed, branch=(1.0, 0.0), step=1e-2, length=1.0,
                           max_turn_deg=30.0) -> CurveTrace:
    """Integrate an asymptotic direction whose third derivative also vanishes.

    Among the (up to four signed) asymptotic branches the tracker keeps the
    one that stays within max_turn_deg of the previous direction and has
    the smallest directional-cubic residual.
    """
    cos_max = math.cos(math.radians(max_turn_deg))
    state = {"prev": np.asarray(branch, dtype=float) / np.linalg.norm(branch)}

    def direction(p):
        j = jets(p[0], p[1])
        k = developable_residual(j)
        k_scale = (abs(j.fxx) + abs(j.fxy) + abs(j.fyy)) ** 2 + 1e-300
        if k > 1e-10 * k_scale:
            raise NoRealRuling(f"positive curvature numerator {k:.3e} near {tuple(p)}")
        kind, dirs = asymptotic_directions(j)
        if kind == "some" and not dirs:
            raise NoRealRuling(f"no real asymptotic direction near {tuple(p)}")
        if kind == "all":
            dirs = [tuple(state["prev"])]
        candidates = []
        for d in dirs:
            for sgn in (1.0, -1.0):
                cand = np.array([sgn * d[0], sgn * d[1]])
                if float(np.dot(cand, state["prev"])) >= cos_max:
                    cub = abs(j.fxxx * cand[0] ** 3 + 3.0 * j.fxxy * cand[0] ** 2 * cand[1]
                              + 3.0 * j.fxyy * cand[0] * cand[1] ** 2 + j.fyyy * cand[1] ** 3)
                    candidates.append((cub, cand))
        if not candidates:
            raise BranchJump(f"no branch within {max_turn_deg} degrees near {tuple(p)}")
        candidates.sort(key=lambda t: t[0])
        best = candidates[0][1]
        state["prev"] = best
        return best

    p = np.asarray(seed, dtype=float)
    n_steps = max(2, int(round(length / step)))
    points = [p.copy()]
    f_vals = [jets(p[0], p[1]).f]
    for _ in range(n_steps):
        p = _rk4(p, step, direction)
        points.append(p.copy())
        f_vals.append(jets(p[0], p[1]).f)
    straightness = _fit_line_deviation(points)
    s = np.arange(len(points)) * step
    coeff = np.polyfit(s, np.array(f_vals), 1)
    linearity = float(np.max(np.abs(np.polyval(coeff, s) - np.array(f_vals))))
    return CurveTrace(points, step, f_vals,
                      {"straightness": straightness, "f_linearity": linearity})


# ---------------------------------------------------------------------------
# Conic traces (top views of enveloping-cone images)
# ---------------------------------------------------------------------------


def integrate_isotropic_circle(jets, seed, theta, root_choice=0, step=None,
                               arc_fraction=0.97, direction=1, mult_tol=1e-12,
                               solve_tol: SolveTolerances | None = None) -> CurveTrace:
    """Trace the tangent field of a continuously tracked hyperosculating root.

    root_choice is an index into the root list (sorted by fourth-order
    residual) or an explicit (u, v) guess. The trace follows the field
    (v, -u), which reproduces the conic's own parametrization exactly when
    the surface is an exact envelope; the circularity report measures the
    deviation from the best-fit circle. MultipleRoot fires when the tracked
    root's Jacobian drops below threshold after leaving the seed (the seed
    itself may sit exactly at a tangency of the family); RootLost fires
    when continuity tracking fails.

    direction = -1 integrates the same field backward; tracing a loop as
    two opposite arcs avoids crossing isolated singular points of the
    graph that the conic may pass through.
    """
    x0, y0 = float(seed[0]), float(seed[1])
    report0 = solve_hyperosculating(x0, y0, jets(x0, y0), theta, solve_tol)
    if report0.identically_zero:
        if isinstance(root_choice, int):
            raise RootLost("identically-zero report needs an explicit (u, v) root choice")
        uv = report0.closest_family_point(tuple(root_choice))
    elif isinstance(root_choice, int):
        if root_choice >= len(report0.roots):
            raise RootLost(f"root index {root_choice} out of range ({len(report0.roots)} roots)")
        rec = report0.roots[root_choice]
        uv = (rec.u, rec.v)
    else:
        uv = _nearest_root(report0, tuple(root_choice))

    # The tracked invariant is the top-view circle CENTER p + (u, v): for a
    # conic contained in the graph it is constant, so center - p is a
    # first-order-exact predictor of the root at a nearby point.
    state = {"center": np.array([x0 + uv[0], y0 + uv[1]])}

    def match(p, update=False, check_gates=False):
        # update=False during Runge-Kutta stages: stage points sit off the
        # curve by O(h^2) and must not contaminate the tracked center.
        jet = jets(p[0], p[1])
        rep = solve_hyperosculating(p[0], p[1], jet, theta, solve_tol)
        guess = state["center"] - p
        # the transported center predicts the root to first order, so the
        # match window can stay tight; anything farther is a different root
        radius = 0.05 * max(1e-6, float(np.linalg.norm(guess)))
        if rep.identically_zero:
            # every direction solves the cubic; rotate about the tracked
            # center as long as the offset stays circle-compatible
            c1 = theta_residual(p[0], p[1], guess[0], guess[1], theta)
            s1 = _theta_residual_scale(p[0], p[1], guess[0], guess[1], math.tan(theta)) + 1e-300
            if abs(c1) <= 1e-3 * s1:
                return np.asarray(guess, dtype=float)
            got = rep.closest_family_point(tuple(guess))
            if got is None:
                raise RootLost("empty family")
            out = np.asarray(got, dtype=float)
            if update:
                state["center"] = p + out
            return out
        best = None
        best_d = float("inf")
        for rec in rep.roots:
            d = math.hypot(rec.u - guess[0], rec.v - guess[1])
            if d < best_d:
                best_d = d
                best = rec
        if best is not None and best_d <= radius and _cleanly_simple(p[0], p[1], jet, best, theta, rel=1e-4):
            out = np.array([best.u, best.v])
            if update:
                state["center"] = p + out
            return out
        # Degenerate zone (near-multiple root, or a merged pair momentarily
        # off the real locus near a fold of the family): the root field is
        # not Lipschitz there and following raw roots amplifies any offset
        # by 1/angle. The tracked center is the invariant of the followed
        # circle, so continue rotating about it as long as that offset
        # remains a near-solution of both contact conditions.
        c1 = theta_residual(p[0], p[1], guess[0], guess[1], theta)
        c1_scale = _theta_residual_scale(p[0], p[1], guess[0], guess[1], math.tan(theta)) + 1e-300
        c2 = hyper_residual(jet, guess[0], guess[1])
        c2_scale = hyper_scale_floored(jet, guess[0], guess[1]) + 1e-300
        if abs(c1) <= 1e-3 * c1_scale and abs(c2) <= 1e-3 * c2_scale:
            return np.asarray(guess, dtype=float)
        # no invariant continuation either: a degenerate root here genuinely
        # obstructs the tracking (the nonmultiple hypothesis fails)
        if best is not None and best_d <= radius:
            if check_gates and not _cleanly_simple(p[0], p[1], jet, best, theta, rel=mult_tol):
                raise MultipleRoot(f"|J| = {abs(best.jacobian):.3e} at {tuple(p)}")
            return np.array([best.u, best.v])
        raise RootLost(f"nearest root {best_d:.3e} away at {tuple(p)}")

    def f_field(p):
        uv_here = match(p)
        return np.array([uv_here[1], -uv_here[0]])

    radius0 = float(math.hypot(uv[0], uv[1]))
    total_t = arc_fraction * 2.0 * math.pi
    if step is None:
        n_steps = 256
        step = total_t / n_steps
    else:
        n_steps = max(2, int(round(total_t / step)))
    step = math.copysign(step, direction)

    p = np.array([x0, y0])
    jet0 = jets(x0, y0)
    za, aa, bb = osculation_coeffs(x0, y0, jet0, uv[0], uv[1])
    points = [p.copy()]
    f_vals = [jet0.f]
    grads = [(jet0.fx, jet0.fy)]
    z_vals = [za]
    t_acc = 0.0
    for k in range(n_steps):
        p = _rk4(p, step, f_field)
        t_acc += step
        match(p, update=True, check_gates=True)
        jet = jets(p[0], p[1])
        points.append(p.copy())
        f_vals.append(jet.f)
        grads.append((jet.fx, jet.fy))
        z_vals.append(za + aa * math.sin(t_acc) + bb * (1.0 - math.cos(t_acc)))
    center, radius, circ_dev = _fit_circle(points)
    f_consistency = max(abs(f - z) for f, z in zip(f_vals, z_vals))
    return CurveTrace(points, step, f_vals, {
        "circularity": circ_dev,
        "circle_center": center,
        "circle_radius": radius,
        "f_consistency": f_consistency,
        "seed_radius": radius0,
        "gradients": grads,
    })


def _cleanly_simple(x, y, jet, rec, theta, rel=1e-8):
    """True when the root's Jacobian is well clear of the multiple-root zone."""
    tan_theta = math.tan(theta)
    g1 = math.hypot(*circle_condition_gradient(x, y, rec.u, rec.v, tan_theta))
    g2 = math.hypot(*hyper_gradient(jet, rec.u, rec.v))
    return abs(rec.jacobian) > rel * max(1.0, g1 * g2)


def _nearest_root(report: SolveReport, uv):
    best = None
    best_d = float("inf")
    for rec in report.roots:
        d = math.hypot(rec.u - uv[0], rec.v - uv[1])
        if d < best_d:
            best_d = d
            best = rec
    if best is None:
        raise RootLost("no roots at the seed")
    return (best.u, best.v)
