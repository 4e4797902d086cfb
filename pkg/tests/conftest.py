"""Shared fixtures and independent oracles for the test suite."""

import math

import numpy as np
import pytest

from coneflank import (
    Jet4,
    expression_jet_provider,
    inverse_stereographic,
    parse_expression,
)

EXACT_ENVELOPE_EXPR = "y^2/(x^2+y^2)"
SPHERE_PARABOLOID_EXPR = "0.5*(x^2+y^2+1)"
THETA30 = math.pi / 6.0


@pytest.fixture(scope="session")
def envelope_provider():
    return expression_jet_provider(EXACT_ENVELOPE_EXPR)


@pytest.fixture(scope="session")
def envelope_eval():
    ast = parse_expression(EXACT_ENVELOPE_EXPR)
    return ast.evaluate


@pytest.fixture(scope="session")
def sphere_provider():
    return expression_jet_provider(SPHERE_PARABOLOID_EXPR)


def fd_jet(f, x, y, h=None):
    """Finite-difference 4-jet oracle: rich-stencil least-squares fit.

    Deliberately independent of the Taylor-mode propagation it checks.
    """
    if h is None:
        h = 1e-2 * max(1.0, math.hypot(x, y))
    pts, vals = [], []
    for i in range(-6, 7):
        for j in range(-6, 7):
            pts.append((i * h, j * h))
            vals.append(f(x + i * h, y + j * h))
    exps = [(i, j) for i in range(7) for j in range(7) if i + j <= 6]
    a = np.array([[dx**i * dy**j for (i, j) in exps] for (dx, dy) in pts])
    coef, *_ = np.linalg.lstsq(a, np.array(vals), rcond=None)
    out = np.zeros((5, 5))
    for (i, j), c in zip(exps, coef):
        if i + j <= 4:
            out[i, j] = c
    return Jet4.from_taylor(x, y, out)


def random_jet(rng, x=None, y=None, scale=1.0):
    if x is None:
        x, y = rng.uniform(-1.2, 1.2, size=2)
    vals = rng.uniform(-scale, scale, size=15)
    return Jet4.from_array(x, y, vals)


def exact_family_conic_params(x, y):
    """Closed-form conic data of the exact-envelope family anchored at (x, y)."""
    rho = x * x + y * y
    return {
        "u": -x / 2.0,
        "v": -y / 2.0,
        "z": y * y / rho,
        "a": x * y / rho,
        "b": (x * x - y * y) / (2.0 * rho),
    }


def plane_offset_from_graph(x, y, f):
    """Signed plane offset h for the plane whose image point is (x, y, f)."""
    n = inverse_stereographic(x, y)
    return n, f * (n[2] + 1.0)


def sylvester_resultant_deg2_deg3(q, c):
    """Resultant oracle for binary forms via the 5x5 Sylvester determinant.

    q = (a, b, c): a u^2 + b uv + c v^2; c = (d, e, f, g): d u^3 + e u^2 v +
    f u v^2 + g v^3.
    """
    a2, b2, c2 = q
    d3, e3, f3, g3 = c
    m = np.array(
        [
            [a2, b2, c2, 0.0, 0.0],
            [0.0, a2, b2, c2, 0.0],
            [0.0, 0.0, a2, b2, c2],
            [d3, e3, f3, g3, 0.0],
            [0.0, d3, e3, f3, g3],
        ]
    )
    return float(np.linalg.det(m))


def fibonacci_sphere_cap(n, max_polar_deg=120.0):
    """n points on the unit sphere with polar angle <= max_polar_deg."""
    zmin = math.cos(math.radians(max_polar_deg))
    golden = math.pi * (3.0 - math.sqrt(5.0))
    pts = []
    for i in range(n):
        z = 1.0 - (i + 0.5) / n * (1.0 - zmin)
        r = math.sqrt(max(0.0, 1.0 - z * z))
        a = golden * i
        pts.append(np.array([r * math.cos(a), r * math.sin(a), z]))
    return pts


def fit_circle_to_points(points):
    pts = np.asarray(points)
    a = np.column_stack([2.0 * pts[:, 0], 2.0 * pts[:, 1], np.ones(len(pts))])
    b = pts[:, 0] ** 2 + pts[:, 1] ** 2
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    cx, cy, c0 = sol
    radius = math.sqrt(max(c0 + cx * cx + cy * cy, 0.0))
    dev = float(np.max(np.abs(np.linalg.norm(pts - np.array([cx, cy]), axis=1) - radius)))
    return (float(cx), float(cy)), radius, dev
