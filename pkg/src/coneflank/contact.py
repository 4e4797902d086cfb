"""Plane-space contact between congruent-cone images and the graph z = f(x, y).

The image of a rotational cone with opening angle theta is a conic whose
top view is a circle; anchored at a graph point (x, y, f) the conic is

    x(t) = x + v sin t + u (1 - cos t)
    y(t) = y - u sin t + v (1 - cos t)
    z(t) = z + a sin t + b (1 - cos t)

where (x+u, y+v) is the top-view center. Opening angle theta constrains
(u, v) through the circle condition (theta_residual == 0); second-order
contact fixes (z, a, b) in closed form; third- and fourth-order contact
add one polynomial condition each (hyper_residual, order4_residual).

solve_hyperosculating reduces the circle+cubic system to one univariate
polynomial of degree six in the rational direction parameter t with
(u : v) = (2t : t^2 - 1), isolates its real roots, and maps them back.
oracle_solve re-derives the same roots by brute force (angle scan plus
bisection) and serves as the independent reference in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .jets import Jet4
from .rootfind import eval_poly, real_roots, refine_multiplicity_aware, trim

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Residuals of the contact conditions
# ---------------------------------------------------------------------------


def osculation_coeffs(x, y, j: Jet4, u, v):
    """(z, a, b) giving second-order contact of the conic in direction (u, v)."""
    z = j.f
    a = j.fx * v - j.fy * u
    b = j.fx * u + j.fy * v + j.fxx * v * v - 2.0 * j.fxy * u * v + j.fyy * u * u
    return z, a, b


def theta_residual(x, y, u, v, theta):
    """Circle condition for opening angle theta (zero iff compatible)."""
    t2 = math.tan(theta) ** 2
    s = x * x + y * y + 1.0 + 2.0 * x * u + 2.0 * y * v
    return s * s - 4.0 * t2 * (u * u + v * v)


def _theta_residual_scale(x, y, u, v, tan_theta):
    s = x * x + y * y + 1.0 + 2.0 * abs(x * u) + 2.0 * abs(y * v)
    return s * s + 4.0 * tan_theta * tan_theta * (u * u + v * v)


def hyper_residual(j: Jet4, u, v):
    """Third-order contact condition (zero iff the osculating conic hyperosculates)."""
    return (
        j.fxxx * v**3
        - 3.0 * j.fxxy * v * v * u
        + 3.0 * j.fxyy * v * u * u
        - j.fyyy * u**3
        + 3.0 * (j.fxx - j.fyy) * u * v
        + 3.0 * j.fxy * (v * v - u * u)
    )


def _hyper_residual_scale(j: Jet4, u, v):
    au, av = abs(u), abs(v)
    return (
        abs(j.fxxx) * av**3
        + 3.0 * abs(j.fxxy) * av * av * au
        + 3.0 * abs(j.fxyy) * av * au * au
        + abs(j.fyyy) * au**3
        + 3.0 * abs(j.fxx - j.fyy) * au * av
        + 3.0 * abs(j.fxy) * (av * av + au * au)
    )


def order4_residual(j: Jet4, u, v):
    """Fourth-order contact condition on top of hyperosculation."""
    return (
        j.fxxxx * v**4
        - 4.0 * j.fxxxy * v**3 * u
        + 6.0 * j.fxxyy * v * v * u * u
        - 4.0 * j.fxyyy * v * u**3
        + j.fyyyy * u**4
        + 6.0 * u * v * v * j.fxxx
        + 6.0 * v * (v * v - 2.0 * u * u) * j.fxxy
        + 6.0 * u * (u * u - 2.0 * v * v) * j.fxyy
        + 6.0 * u * u * v * j.fyyy
        + 3.0 * (u * u - v * v) * (j.fxx - j.fyy)
        + 12.0 * u * v * j.fxy
    )


def hyper_scale_floored(j: Jet4, u, v):
    """Term scale of hyper_residual with a jet-level floor.

    The raw term scale can vanish on symmetry loci even when the jet is far
    from flat; the floor keeps relative-residual tests meaningful there.
    """
    s = _hyper_residual_scale(j, u, v)
    return s + 1e-12 * (j.scale() * (1.0 + u * u + v * v) ** 1.5 + 1.0)


def circle_condition_gradient(x, y, u, v, tan_theta):
    """Gradient of theta_residual with respect to (u, v)."""
    s = x * x + y * y + 1.0 + 2.0 * x * u + 2.0 * y * v
    t2 = tan_theta * tan_theta
    return 4.0 * x * s - 8.0 * t2 * u, 4.0 * y * s - 8.0 * t2 * v


def hyper_gradient(j: Jet4, u, v):
    """Gradient of hyper_residual with respect to (u, v)."""
    du = (
        -3.0 * j.fxxy * v * v
        + 6.0 * j.fxyy * u * v
        - 3.0 * j.fyyy * u * u
        + 3.0 * (j.fxx - j.fyy) * v
        - 6.0 * j.fxy * u
    )
    dv = (
        3.0 * j.fxxx * v * v
        - 6.0 * j.fxxy * u * v
        + 3.0 * j.fxyy * u * u
        + 3.0 * (j.fxx - j.fyy) * u
        + 6.0 * j.fxy * v
    )
    return du, dv


def multiplicity_jacobian(x, y, j: Jet4, u, v, theta):
    """Jacobian determinant of the (circle, hyperosculation) system in (u, v).

    Vanishes exactly at multiple roots. Evaluated through the half-gradient
    combination so the structural zero at tangential intersections is exact
    rather than a cancellation artifact; the value equals the literal 2x2
    determinant of the two gradients.
    """
    t2 = math.tan(theta) ** 2
    s = x * x + y * y + 1.0 + 2.0 * x * u + 2.0 * y * v
    au = x * s - 2.0 * t2 * u
    av = y * s - 2.0 * t2 * v
    combo = (
        j.fxxx * v * v * au
        + j.fxxy * v * (v * av - 2.0 * u * au)
        + j.fxyy * u * (u * au - 2.0 * v * av)
        + j.fyyy * u * u * av
        + (j.fxx - j.fyy) * (u * au - v * av)
        + 2.0 * j.fxy * (u * av + v * au)
    )
    return 12.0 * combo


# ---------------------------------------------------------------------------
# Conic candidates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConicCandidate:
    """Conic anchored at (x, y, z) with top-view center offset (u, v)."""

    x: float
    y: float
    z: float
    u: float
    v: float
    a: float
    b: float
    theta: float

    @staticmethod
    def from_jet(x, y, j: Jet4, u, v, theta) -> "ConicCandidate":
        z, a, b = osculation_coeffs(x, y, j, u, v)
        return ConicCandidate(float(x), float(y), z, float(u), float(v), a, b, float(theta))

    def point(self, t):
        st, ct = math.sin(t), 1.0 - math.cos(t)
        return (
            self.x + self.v * st + self.u * ct,
            self.y - self.u * st + self.v * ct,
            self.z + self.a * st + self.b * ct,
        )

    def top_view(self, t):
        st, ct = math.sin(t), 1.0 - math.cos(t)
        return self.x + self.v * st + self.u * ct, self.y - self.u * st + self.v * ct

    def top_center(self):
        return self.x + self.u, self.y + self.v

    def top_radius(self):
        return math.hypot(self.u, self.v)


# ---------------------------------------------------------------------------
# Degree-six reduction and the solver
# ---------------------------------------------------------------------------


def reduced_polynomial(x, y, j: Jet4, tan_theta):
    """Ascending coefficients of the univariate reduction in t.

    Substituting the rational direction parametrization of the circle
    condition into the hyperosculation cubic and clearing denominators
    yields this polynomial; its real roots are the candidate directions.
    Returns (coeffs, abs_scale) where abs_scale bounds the coefficient
    assembly with all cancellation removed (for the identically-zero test).
    """
    q = x * x + y * y + 1.0
    a3, b3, c3, d3 = j.fxxx, j.fxxy, j.fxyy, j.fyyy
    e2 = j.fxx - j.fyy
    f2 = j.fxy
    p = tan_theta - y
    qq = y + tan_theta
    coeffs = [
        -q * a3 + 6.0 * f2 * qq,                                    # t^0
        -6.0 * q * b3 - 12.0 * (e2 * qq + x * f2),                  # t^1
        q * (3.0 * a3 - 12.0 * c3) + 6.0 * (-6.0 * f2 * qq + 4.0 * e2 * x + f2 * p),  # t^2
        q * (12.0 * b3 - 8.0 * d3) + 24.0 * e2 * y + 72.0 * f2 * x,  # t^3
        q * (-3.0 * a3 + 12.0 * c3) + 6.0 * (f2 * qq - 4.0 * e2 * x - 6.0 * f2 * p),  # t^4
        -6.0 * q * b3 + 12.0 * (e2 * p - x * f2),                   # t^5
        q * a3 + 6.0 * f2 * p,                                      # t^6
    ]
    aa, ab, ac, ad = abs(a3), abs(b3), abs(c3), abs(d3)
    ae, af = abs(e2), abs(f2)
    ap, aq_, ax, ay = abs(p), abs(qq), abs(x), abs(y)
    bounds = [
        q * aa + 6.0 * af * aq_,
        6.0 * q * ab + 12.0 * (ae * aq_ + ax * af),
        q * (3.0 * aa + 12.0 * ac) + 6.0 * (6.0 * af * aq_ + 4.0 * ae * ax + af * ap),
        q * (12.0 * ab + 8.0 * ad) + 24.0 * ae * ay + 72.0 * af * ax,
        q * (3.0 * aa + 12.0 * ac) + 6.0 * (af * aq_ + 4.0 * ae * ax + 6.0 * af * ap),
        6.0 * q * ab + 12.0 * (ae * ap + ax * af),
        q * aa + 6.0 * af * ap,
    ]
    return coeffs, max(bounds)


def direction_from_parameter(x, y, tan_theta, t):
    """(u, v, denominator) of the rational parametrization at t."""
    q = x * x + y * y + 1.0
    den = t * t * tan_theta - t * t * y - 2.0 * t * x + y + tan_theta
    if den == 0.0:
        return None, None, 0.0
    return t * q / den, (t * t - 1.0) * q / (2.0 * den), den


@dataclass(frozen=True)
class RootRecord:
    """One accepted direction with its residuals and degeneracy data."""

    u: float
    v: float
    c1_residual: float
    c2_residual: float
    c3_residual: float
    jacobian: float
    multiple: bool
    at_infinity: bool
    t: float | None = None


@dataclass
class SolveTolerances:
    accept_abs: float = 1e-8       # |circle|, |hyper| acceptance after polish
    accept_rel: float = 1e-9       # relative to the residual's term scale
    mult_tol: float = 1e-8         # |J| <= mult_tol * gradient scale marks a multiple root
    zero_rel: float = 1e-12        # all reduced coefficients below this * scale: identically zero
    degenerate_rel: float = 1e-9   # leading coefficient below this * scale: degree drop
    dedup_rel: float = 1e-6        # (u, v) distance merging identical roots
    absorb_rel: float = 1e-4       # merge radius around roots flagged multiple
    touch_rel: float = 1e-9        # touching-root acceptance inside root isolation


@dataclass
class SolveReport:
    """Root set of the circle+hyperosculation system at one point."""

    x: float
    y: float
    theta: float
    roots: list
    degenerate_leading: bool
    identically_zero: bool
    poly: list = field(default_factory=list)

    def _family_uv(self, psi):
        """Point of the circle-condition conic at angle parameter psi.

        psi parametrizes the rational direction parameter as t = tan(psi);
        psi = +-pi/2 is the parametrization's point at infinity (direction
        (0, 1)). Returns None at poles of the parametrization.
        """
        tan_theta = math.tan(self.theta)
        c = math.cos(psi)
        if abs(c) < 1e-14:
            if abs(tan_theta - self.y) < 1e-12:
                return None
            q = self.x * self.x + self.y * self.y + 1.0
            return (0.0, q / (2.0 * (tan_theta - self.y)))
        t = math.tan(psi)
        u, v, den = direction_from_parameter(self.x, self.y, tan_theta, t)
        if u is None or abs(den) < 1e-12 * (1.0 + t * t):
            return None
        return (u, v)

    def family_points(self, n=64):
        """Sample of the full circle-condition solution set.

        Meaningful when identically_zero is set (every direction solves the
        cubic); also usable as a parametrization of the circle condition.
        """
        pts = []
        for k in range(n + 1):
            psi = -0.5 * math.pi + math.pi * k / n
            uv = self._family_uv(psi)
            if uv is not None:
                pts.append(uv)
        return pts

    def closest_family_point(self, target_uv, n=512):
        """Point of the circle-condition conic closest to target_uv.

        Coarse scan over the angle parameter followed by golden-section
        refinement, so the result is accurate to parametrization precision
        rather than scan resolution.
        """
        tu, tv = target_uv

        def dist2(psi):
            uv = self._family_uv(psi)
            if uv is None:
                return float("inf")
            return (uv[0] - tu) ** 2 + (uv[1] - tv) ** 2

        best_k = None
        best_d = float("inf")
        psis = [-0.5 * math.pi + math.pi * k / n for k in range(n + 1)]
        for k, psi in enumerate(psis):
            d = dist2(psi)
            if d < best_d:
                best_d = d
                best_k = k
        if best_k is None:
            return None
        lo = psis[max(best_k - 1, 0)]
        hi = psis[min(best_k + 1, n)]
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        a, b = lo, hi
        c1 = b - invphi * (b - a)
        c2 = a + invphi * (b - a)
        f1, f2 = dist2(c1), dist2(c2)
        for _ in range(90):
            if f1 < f2:
                b, c2, f2 = c2, c1, f1
                c1 = b - invphi * (b - a)
                f1 = dist2(c1)
            else:
                a, c1, f1 = c1, c2, f2
                c2 = a + invphi * (b - a)
                f2 = dist2(c2)
        return self._family_uv(0.5 * (a + b))


def newton_polish_uv(x, y, j: Jet4, theta, u, v, steps=8):
    """Damped Newton on the (circle, hyperosculation) pair; keeps the best iterate."""
    tan_theta = math.tan(theta)

    def norm(uu, vv):
        s1 = _theta_residual_scale(x, y, uu, vv, tan_theta)
        r1 = theta_residual(x, y, uu, vv, theta) / (s1 + 1e-300)
        r2 = hyper_residual(j, uu, vv) / (hyper_scale_floored(j, uu, vv) + 1e-300)
        return max(abs(r1), abs(r2))

    best = (u, v)
    best_n = norm(u, v)
    cu, cv = u, v
    for _ in range(steps):
        f1 = theta_residual(x, y, cu, cv, theta)
        f2 = hyper_residual(j, cu, cv)
        g1u, g1v = circle_condition_gradient(x, y, cu, cv, tan_theta)
        g2u, g2v = hyper_gradient(j, cu, cv)
        det = g1u * g2v - g1v * g2u
        n1 = math.hypot(g1u, g1v)
        n2 = math.hypot(g2u, g2v)
        if abs(det) > 1e-14 * max(n1 * n2, 1e-300):
            du = (-f1 * g2v + f2 * g1v) / det
            dv = (-g1u * f2 + g2u * f1) / det
        else:
            # singular: damped least-squares step
            a11 = g1u * g1u + g2u * g2u
            a12 = g1u * g1v + g2u * g2v
            a22 = g1v * g1v + g2v * g2v
            lam = 1e-12 * (a11 + a22) + 1e-300
            b1 = -(g1u * f1 + g2u * f2)
            b2 = -(g1v * f1 + g2v * f2)
            d = (a11 + lam) * (a22 + lam) - a12 * a12
            du = (b1 * (a22 + lam) - a12 * b2) / d
            dv = ((a11 + lam) * b2 - a12 * b1) / d
        nu, nv = cu + du, cv + dv
        nn = norm(nu, nv)
        if not math.isfinite(nn):
            break
        if nn < best_n:
            best, best_n = (nu, nv), nn
        cu, cv = nu, nv
        if best_n < 1e-15:
            break
    return best


def solve_hyperosculating(x, y, j: Jet4, theta, tol: SolveTolerances | None = None) -> SolveReport:
    """All real hyperosculating directions (u, v) at (x, y) for angle theta.

    Degeneracies come back as flags, never exceptions: degenerate_leading
    when the reduction drops degree (a direction escapes to the
    parametrization's infinity, tested separately), identically_zero when
    every direction satisfies the cubic (the report then carries the full
    circle-condition family).
    """
    if not (0.0 < theta < 0.5 * math.pi):
        raise ValueError("theta must be in (0, pi/2)")
    tol = tol or SolveTolerances()
    tan_theta = math.tan(theta)
    x = float(x)
    y = float(y)
    q = x * x + y * y + 1.0

    coeffs, scale = reduced_polynomial(x, y, j, tan_theta)
    max_c = max(abs(c) for c in coeffs)
    identically_zero = max_c <= tol.zero_rel * (scale + 1e-300)
    degenerate_leading = abs(coeffs[6]) <= tol.degenerate_rel * (scale + 1e-300)

    report = SolveReport(x, y, theta, [], degenerate_leading, identically_zero, list(coeffs))
    if identically_zero:
        return report

    # candidates: (u, v, at_infinity, multiplicity)
    candidates = []
    for t in real_roots(coeffs, touch_rel=tol.touch_rel):
        t_ref, mult = refine_multiplicity_aware(coeffs, t)
        u, v, den = direction_from_parameter(x, y, tan_theta, t_ref)
        den_scale = abs(t_ref * t_ref * tan_theta) + abs(t_ref * t_ref * y) + 2.0 * abs(t_ref * x) + abs(y) + tan_theta
        if u is None or abs(den) <= 1e-9 * (den_scale + 1e-300):
            # parametrization pole: recover from the direction (2t, t^2-1)
            du, dv = 2.0 * t_ref, t_ref * t_ref - 1.0
            nrm = math.hypot(du, dv)
            if nrm == 0.0:
                continue
            du, dv = du / nrm, dv / nrm
            dden = tan_theta - (x * du + y * dv)
            if abs(dden) < 1e-12:
                dden = -tan_theta - (x * du + y * dv)
            if abs(dden) < 1e-12:
                continue
            s = q / (2.0 * dden)
            u, v = s * du, s * dv
        candidates.append((u, v, False, mult))

    # direction (u : v) = (0 : 1): the parametrization's point at infinity
    if abs(tan_theta - y) > 1e-12:
        s_inf = q / (2.0 * (tan_theta - y))
        candidates.append((0.0, s_inf, True, 1))

    accepted = []
    for u0, v0, at_inf, mult in candidates:
        u, v = newton_polish_uv(x, y, j, theta, u0, v0)
        if at_inf and math.hypot(u - u0, v - v0) > 1e-3 * max(1.0, abs(v0)):
            continue  # polish drifted to some other (finite-parameter) root
        r1 = theta_residual(x, y, u, v, theta)
        r2 = hyper_residual(j, u, v)
        s1 = _theta_residual_scale(x, y, u, v, tan_theta)
        s2 = _hyper_residual_scale(j, u, v)
        if abs(r1) > max(tol.accept_abs, tol.accept_rel * s1):
            continue
        if abs(r2) > max(tol.accept_abs, tol.accept_rel * s2):
            continue
        r3 = order4_residual(j, u, v)
        jac = multiplicity_jacobian(x, y, j, u, v, theta)
        g1 = math.hypot(*circle_condition_gradient(x, y, u, v, tan_theta))
        g2 = math.hypot(*hyper_gradient(j, u, v))
        multiple = abs(jac) <= tol.mult_tol * max(1.0, g1 * g2)
        accepted.append(RootRecord(u, v, r1, r2, r3, jac, multiple, at_inf, None))

    report.roots = _dedup_roots(accepted, tol)
    report.roots.sort(key=lambda r: abs(r.c3_residual))
    return report


def _dedup_roots(records, tol: SolveTolerances):
    """Merge numerically identical roots, letting multiple roots absorb their cluster."""
    records = sorted(records, key=lambda r: (abs(r.c3_residual), max(abs(r.c1_residual), abs(r.c2_residual))))
    kept = []
    for rec in records:
        scale = max(1.0, math.hypot(rec.u, rec.v))
        dup = False
        for other in kept:
            radius = tol.dedup_rel * scale
            if rec.multiple or other.multiple:
                radius = max(radius, tol.absorb_rel * scale)
            if math.hypot(rec.u - other.u, rec.v - other.v) <= radius:
                dup = True
                break
        if not dup:
            kept.append(rec)
    return kept


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------


def oracle_solve(x, y, j: Jet4, theta, n_angles=720, tol: SolveTolerances | None = None) -> SolveReport:
    """Ground-truth root finder: scan directions, bisect the cubic's sign changes.

    For each direction angle phi the circle condition is linear in the
    scale s on each sign branch; the cubic restricted to the resulting
    curve is bracketed and bisected in phi. Independent of the polynomial
    reduction used by solve_hyperosculating.
    """
    if n_angles < 360:
        raise ValueError("n_angles must be at least 360")
    tol = tol or SolveTolerances()
    tan_theta = math.tan(theta)
    x = float(x)
    y = float(y)
    q = x * x + y * y + 1.0
    den_scale = 2.0 * tan_theta + 2.0 * math.hypot(x, y) + 1e-300

    def curve_point(phi, branch):
        c, s = math.cos(phi), math.sin(phi)
        den = 2.0 * branch * tan_theta - 2.0 * (x * c + y * s)
        if abs(den) < 1e-9 * den_scale:
            return None
        r = q / den
        return r * c, r * s

    def g(phi, branch):
        pt = curve_point(phi, branch)
        if pt is None:
            return None
        return hyper_residual(j, pt[0], pt[1])

    def bisect(lo, hi, glo, branch):
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            gm = g(mid, branch)
            if gm is None:
                break
            if gm == 0.0:
                return mid
            if (gm > 0.0) == (glo > 0.0):
                lo, glo = mid, gm
            else:
                hi = mid
        return 0.5 * (lo + hi)

    found = []
    all_small = True
    for branch in (1.0, -1.0):
        phis = [TWO_PI * k / n_angles for k in range(n_angles + 1)]
        vals = []
        for phi in phis:
            pt = curve_point(phi, branch)
            if pt is None:
                vals.append(None)
                continue
            gv = hyper_residual(j, pt[0], pt[1])
            gs = _hyper_residual_scale(j, pt[0], pt[1])
            vals.append((gv, gs, pt))
            if abs(gv) > 1e-12 * (gs + 1e-300):
                all_small = False
        for k in range(n_angles):
            a, b = vals[k], vals[k + 1]
            if a is None or b is None:
                continue
            ga, gb = a[0], b[0]
            if ga == 0.0:
                found.append((phis[k], branch))
            elif ga * gb < 0.0:
                found.append((bisect(phis[k], phis[k + 1], ga, branch), branch))
        # tangency rescue: |g| dips to noise level without a sign change
        for k in range(1, n_angles):
            a, m, b = vals[k - 1], vals[k], vals[k + 1]
            if a is None or m is None or b is None:
                continue
            if abs(m[0]) < abs(a[0]) and abs(m[0]) <= abs(b[0]) and abs(m[0]) <= 1e-5 * (m[1] + 1e-300):
                lo, hi = phis[k - 1], phis[k + 1]
                for _ in range(100):
                    d = (hi - lo) / 3.0
                    p1, p2 = lo + d, hi - d
                    g1v, g2v = g(p1, branch), g(p2, branch)
                    if g1v is None or g2v is None:
                        break
                    if abs(g1v) < abs(g2v):
                        hi = p2
                    else:
                        lo = p1
                phi_m = 0.5 * (lo + hi)
                gm = g(phi_m, branch)
                if gm is not None and abs(gm) <= 1e-7 * (m[1] + 1e-300):
                    found.append((phi_m, branch))

    report = SolveReport(x, y, theta, [], False, all_small, [])
    if all_small:
        return report

    records = []
    for phi, branch in found:
        pt = curve_point(phi, branch)
        if pt is None:
            continue
        u, v = pt
        r1 = theta_residual(x, y, u, v, theta)
        r2 = hyper_residual(j, u, v)
        r3 = order4_residual(j, u, v)
        jac = multiplicity_jacobian(x, y, j, u, v, theta)
        g1 = math.hypot(*circle_condition_gradient(x, y, u, v, tan_theta))
        g2 = math.hypot(*hyper_gradient(j, u, v))
        multiple = abs(jac) <= tol.mult_tol * max(1.0, g1 * g2)
        records.append(RootRecord(u, v, r1, r2, r3, jac, multiple, False, None))
    report.roots = _dedup_roots(records, tol)
    report.roots.sort(key=lambda r: abs(r.c3_residual))
    return report


def candidate_directions(x, y, j: Jet4, theta, n_angles=720, n_best=6):
    """Best hyperosculation candidates even when exact roots have been lost.

    Scans the circle-condition curve and returns up to n_best directions
    ranked by the normalized cubic magnitude: exact roots (sign changes)
    come out exactly, while root pairs that noise has pushed off the real
    locus come out as the local minimizers between them. Intended for tool
    positioning on measured data, where the initialization wants its six
    candidates regardless of how noisy the jets are.

    Returns a list of (u, v, normalized_cubic) sorted by the last entry.
    """
    tan_theta = math.tan(theta)
    x = float(x)
    y = float(y)
    q = x * x + y * y + 1.0
    den_scale = 2.0 * tan_theta + 2.0 * math.hypot(x, y) + 1e-300

    def curve_point(phi, branch):
        c, s = math.cos(phi), math.sin(phi)
        den = 2.0 * branch * tan_theta - 2.0 * (x * c + y * s)
        if abs(den) < 1e-9 * den_scale:
            return None
        r = q / den
        return r * c, r * s

    def g_norm(phi, branch):
        pt = curve_point(phi, branch)
        if pt is None:
            return None, None
        val = hyper_residual(j, pt[0], pt[1])
        return abs(val) / (hyper_scale_floored(j, pt[0], pt[1]) + 1e-300), pt

    found = []
    for branch in (1.0, -1.0):
        phis = [TWO_PI * k / n_angles for k in range(n_angles + 1)]
        vals = [g_norm(phi, branch) for phi in phis]
        for k in range(1, n_angles + 1):
            a = vals[k - 1][0]
            m = vals[k][0]
            b = vals[(k + 1) % (n_angles + 1)][0] if k < n_angles else None
            if a is None or m is None or b is None:
                continue
            if m <= a and m <= b:
                lo, hi = phis[k - 1], phis[k + 1]
                invphi = (math.sqrt(5.0) - 1.0) / 2.0
                aa, bb = lo, hi
                c1p = bb - invphi * (bb - aa)
                c2p = aa + invphi * (bb - aa)
                f1 = g_norm(c1p, branch)[0]
                f2 = g_norm(c2p, branch)[0]
                for _ in range(60):
                    if f1 is None or f2 is None:
                        break
                    if f1 < f2:
                        bb, c2p, f2 = c2p, c1p, f1
                        c1p = bb - invphi * (bb - aa)
                        f1 = g_norm(c1p, branch)[0]
                    else:
                        aa, c1p, f1 = c1p, c2p, f2
                        c2p = aa + invphi * (bb - aa)
                        f2 = g_norm(c2p, branch)[0]
                phi0 = 0.5 * (aa + bb)
                gm, pt = g_norm(phi0, branch)
                if gm is None:
                    continue
                found.append((pt[0], pt[1], gm))
                # a strictly positive dip is typically a root pair pushed off
                # the real locus; under the local model g ~ g0 + c (phi-phi0)^2
                # the lost pair sits at phi0 +- sqrt(g0/c)
                delta_probe = TWO_PI / n_angles
                ga = g_norm(phi0 + delta_probe, branch)[0]
                gb = g_norm(phi0 - delta_probe, branch)[0]
                if ga is not None and gb is not None:
                    curv = (ga + gb - 2.0 * gm) / (delta_probe * delta_probe)
                    if curv > 0.0 and gm > 0.0:
                        delta = math.sqrt(gm / curv)
                        if delta < 0.5:
                            for sgn in (1.0, -1.0):
                                gs, ps = g_norm(phi0 + sgn * delta, branch)
                                if gs is not None:
                                    found.append((ps[0], ps[1], gs))
    found.sort(key=lambda t: t[2])
    kept = []
    for u, v, gm in found:
        scale = max(1.0, math.hypot(u, v))
        if not any(math.hypot(u - ku, v - kv) <= 1e-4 * scale for ku, kv, _ in kept):
            kept.append((u, v, gm))
        if len(kept) >= n_best:
            break
    if len(kept) < n_best:
        # strongly perturbed data can erase a root pair without leaving a
        # dip; pad with the next-best separated directions so the caller
        # still gets its full candidate set, residuals telling the story
        grid_pts = []
        for branch in (1.0, -1.0):
            for k in range(n_angles):
                gv, pt = g_norm(TWO_PI * k / n_angles, branch)
                if gv is not None:
                    grid_pts.append((pt[0], pt[1], gv))
        grid_pts.sort(key=lambda t: t[2])
        for u, v, gm in grid_pts:
            if len(kept) >= n_best:
                break
            scale = max(1.0, math.hypot(u, v))
            if not any(math.hypot(u - ku, v - kv) <= 0.15 * scale for ku, kv, _ in kept):
                kept.append((u, v, gm))
        kept.sort(key=lambda t: t[2])
    return kept


# ---------------------------------------------------------------------------
# Contact-order estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContactOrderEstimate:
    slope: float
    contained: bool
    max_gap: float


def contact_order_estimate(
    c: ConicCandidate,
    f_eval,
    t_lo=3e-3,
    t_hi=3e-2,
    n_probes=10,
    contained_tol=1e-12,
) -> ContactOrderEstimate:
    """Log-log slope of the gap |z(t) - f(x(t), y(t))| over a decade of t.

    A slope near k means the gap decays like t^k; the conic is reported as
    contained when every probe gap is below contained_tol.
    """
    logs_t = []
    logs_g = []
    max_gap = 0.0
    for k in range(n_probes):
        t = t_lo * (t_hi / t_lo) ** (k / (n_probes - 1))
        xt, yt, zt = c.point(t)
        gap = abs(zt - f_eval(xt, yt))
        max_gap = max(max_gap, gap)
        if gap > 0.0:
            logs_t.append(math.log(t))
            logs_g.append(math.log(gap))
    if max_gap <= contained_tol:
        return ContactOrderEstimate(float("inf"), True, max_gap)
    if len(logs_t) < 2:
        return ContactOrderEstimate(float("inf"), True, max_gap)
    n = len(logs_t)
    mt = sum(logs_t) / n
    mg = sum(logs_g) / n
    num = sum((a - mt) * (b - mg) for a, b in zip(logs_t, logs_g))
    den = sum((a - mt) ** 2 for a in logs_t)
    return ContactOrderEstimate(num / den, False, max_gap)
