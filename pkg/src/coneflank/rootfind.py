"""Real-root isolation for the low-degree polynomials of the contact system.

Strategy: recurse down the derivative chain. The critical points of p
(roots of p') split the Cauchy interval into monotone pieces, each holding
at most one sign-change root, which bisection then pins down. Roots of
even multiplicity never change sign, so a second pass accepts critical
points where |p| is at noise level; because those critical points are
simple roots one level down the chain, they are located to full precision,
which is exactly what reconstruction accuracy at tangential (merged) roots
requires. No eigen-solver is involved.

Coefficients are ascending: c[k] multiplies t**k.
"""

from __future__ import annotations

import math

_BISECT_STEPS = 90
_NEWTON_STEPS = 12


def eval_poly(c, t):
    """Horner evaluation; c ascending."""
    acc = 0.0
    for k in range(len(c) - 1, -1, -1):
        acc = acc * t + c[k]
    return acc


def eval_poly_scale(c, t):
    """Sum of |c_k| |t|^k, the round-off scale of eval_poly at t."""
    acc = 0.0
    at = abs(t)
    for k in range(len(c) - 1, -1, -1):
        acc = acc * at + abs(c[k])
    return acc


def poly_noise_scale(c, t):
    """Noise reference for deciding that p(t) is 'numerically zero'.

    Floors the evaluation scale by the largest coefficient: near t = 0 the
    plain evaluation scale collapses to |c_0|, which says nothing about the
    assembly error the coefficients themselves carry.
    """
    return eval_poly_scale(c, t) + max((abs(v) for v in c), default=0.0)


def derivative(c):
    return [c[k] * k for k in range(1, len(c))]


def trim(c, rel=1e-13):
    """Drop negligible leading coefficients (relative to the largest one)."""
    top = max((abs(v) for v in c), default=0.0)
    if top == 0.0:
        return []
    out = list(c)
    while out and abs(out[-1]) <= rel * top:
        out.pop()
    return out


def cauchy_bound(c):
    lead = abs(c[-1])
    if lead == 0.0:
        return 1.0
    return 1.0 + max(abs(v) for v in c[:-1]) / lead if len(c) > 1 else 1.0


def _bisect(c, lo, hi, flo):
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        fm = eval_poly(c, mid)
        if fm == 0.0:
            return mid
        if (fm > 0.0) == (flo > 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _newton(c, dc, t, lo=None, hi=None):
    for _ in range(_NEWTON_STEPS):
        f = eval_poly(c, t)
        d = eval_poly(dc, t)
        if d == 0.0:
            break
        step = f / d
        t2 = t - step
        if lo is not None and not (lo <= t2 <= hi):
            break
        if t2 == t:
            break
        t = t2
        if abs(step) < 1e-16 * max(1.0, abs(t)):
            break
    return t


def real_roots(c, touch_rel=1e-9):
    """All real roots of the polynomial with ascending coefficients c.

    Roots of even multiplicity are reported once, located via the critical
    points of the derivative chain; odd-multiplicity roots come out of
    sign-change bisection. touch_rel controls how small |p| must be at a
    critical point (relative to the evaluation scale) to count as a
    touching root.
    """
    c = trim(c)
    n = len(c) - 1
    if n <= 0:
        return []
    if n == 1:
        return [-c[0] / c[1]]
    if n == 2:
        a2, a1, a0 = c[2], c[1], c[0]
        disc = a1 * a1 - 4.0 * a2 * a0
        if disc < 0.0:
            # tolerate a grazing double root
            if disc > -touch_rel * (a1 * a1 + 4.0 * abs(a2 * a0) + 1e-300):
                return [-a1 / (2.0 * a2)]
            return []
        sq = math.sqrt(disc)
        q = -0.5 * (a1 + math.copysign(sq, a1)) if a1 != 0.0 else 0.5 * sq * (1 if a2 > 0 else -1)
        if q == 0.0:
            return [0.0] if disc == 0.0 else [0.0, 0.0][:1]
        r1 = q / a2
        r2 = a0 / q
        return sorted([r1, r2]) if abs(r1 - r2) > 0 else [r1]

    dc = derivative(c)
    crit = real_roots(dc, touch_rel)
    bound = cauchy_bound(c)
    nodes = [-bound] + sorted(t for t in crit if -bound < t < bound) + [bound]

    roots = []
    for a, b in zip(nodes[:-1], nodes[1:]):
        fa = eval_poly(c, a)
        fb = eval_poly(c, b)
        if fa == 0.0:
            roots.append(a)
            continue
        if fa * fb < 0.0:
            t = _bisect(c, a, b, fa)
            t = _newton(c, dc, t, a, b)
            roots.append(t)
    fb = eval_poly(c, nodes[-1])
    if fb == 0.0:
        roots.append(nodes[-1])

    # even-multiplicity roots: critical points where p touches zero
    for t in crit:
        if abs(eval_poly(c, t)) <= touch_rel * (poly_noise_scale(c, t) + 1e-300):
            roots.append(t)

    roots.sort()
    out = []
    for t in roots:
        if not out or abs(t - out[-1]) > 1e-9 * max(1.0, abs(t), abs(out[-1])):
            out.append(t)
    return out


def refine_multiplicity_aware(c, t, max_mult=4, noise_rel=1e-9):
    """Polish a root that may be multiple.

    Tries multiplicities m = max_mult..1: Newton on the (m-1)-th derivative
    (where an m-fold root of p is simple) and accepts the highest m whose
    lower derivatives all evaluate at noise level there. noise_rel must stay
    near round-off: a genuine m-fold root evaluates at machine noise, while
    a merely close pair of simple roots does not, and collapsing such a
    pair to its midpoint would lose both. Returns (t, m).
    """
    chain = [list(c)]
    for _ in range(max_mult - 1):
        chain.append(derivative(chain[-1]))
    best = (t, 1)
    for m in range(max_mult, 0, -1):
        cm = chain[m - 1]
        if len(cm) <= 1:
            continue
        tm = _newton(cm, derivative(cm), t)
        if not math.isfinite(tm) or abs(tm - t) > 0.1 * max(1.0, abs(t)):
            continue
        ok = True
        for j in range(m):
            if abs(eval_poly(chain[j], tm)) > noise_rel * (poly_noise_scale(chain[j], tm) + 1e-300):
                ok = False
                break
        if ok:
            return tm, m
    # plain Newton as fallback
    return _newton(c, derivative(c), t), best[1]
