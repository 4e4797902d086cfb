"""Point model of oriented planes and the maps between design space and it.

An oriented plane n.p + h = 0 with unit normal n != (0,0,-1) is encoded as
the point

    (n1/(n3+1), n2/(n3+1), h/(n3+1)).

A surface with nonvanishing Gaussian curvature becomes (locally) the graph
z = f(x, y) of the plane coordinates of its tangent planes; oriented
spheres become rotational paraboloids with vertical axis. All operations
here are pure functions; there is no shared state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMeanNormal, NormalAtSouthPole

SOUTH_POLE_EPS = 1e-9


@dataclass(frozen=True)
class OrientedPlane:
    """Plane n.p + h = 0 with oriented unit normal n and signed offset h."""

    n: np.ndarray
    h: float

    @staticmethod
    def of(n, h) -> "OrientedPlane":
        n = np.asarray(n, dtype=float)
        norm = float(np.linalg.norm(n))
        if norm == 0.0:
            raise ValueError("plane normal must be nonzero")
        return OrientedPlane(n / norm, float(h))


@dataclass(frozen=True)
class IsotropicPoint:
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class SurfaceSample:
    """Oriented surface point: position r and unit normal n."""

    r: np.ndarray
    n: np.ndarray

    @staticmethod
    def of(r, n) -> "SurfaceSample":
        r = np.asarray(r, dtype=float)
        n = np.asarray(n, dtype=float)
        norm = float(np.linalg.norm(n))
        if norm == 0.0:
            raise ValueError("sample normal must be nonzero")
        return SurfaceSample(r, n / norm)


@dataclass(frozen=True)
class IsotropicSample:
    """Image of one oriented sample: graph value and exact first partials."""

    x: float
    y: float
    f: float
    fx: float
    fy: float


@dataclass(frozen=True)
class ParaboloidCoeffs:
    """z = c2*(x^2+y^2) + l1*x + l2*y + c0; c2 = 0 degenerates to a plane."""

    c2: float
    l1: float
    l2: float
    c0: float

    def evaluate(self, x, y):
        return self.c2 * (x * x + y * y) + self.l1 * x + self.l2 * y + self.c0


def plane_to_isotropic(p: OrientedPlane, eps: float = SOUTH_POLE_EPS) -> IsotropicPoint:
    """Map an oriented plane to its point coordinates."""
    n1, n2, n3 = float(p.n[0]), float(p.n[1]), float(p.n[2])
    if n3 <= -1.0 + eps:
        raise NormalAtSouthPole(f"normal n3={n3} too close to (0,0,-1)")
    w = n3 + 1.0
    return IsotropicPoint(n1 / w, n2 / w, p.h / w)


def inverse_stereographic(x: float, y: float) -> np.ndarray:
    """Unit normal whose stereographic projection from (0,0,-1) is (x, y)."""
    s = x * x + y * y + 1.0
    return np.array([2.0 * x, 2.0 * y, 1.0 - x * x - y * y]) / s


def isotropic_to_plane(q: IsotropicPoint) -> OrientedPlane:
    """Inverse of plane_to_isotropic; round trip is the identity."""
    n = inverse_stereographic(q.x, q.y)
    h = q.z * (n[2] + 1.0)
    return OrientedPlane(n, float(h))


def sphere_to_paraboloid(center, radius: float, orientation: str = "inward") -> ParaboloidCoeffs:
    """Image of an oriented sphere (radius 0 = point sphere is allowed).

    Outward orientation is the inward formula with the radius negated.
    """
    m1, m2, m3 = (float(c) for c in center)
    r = float(radius)
    if orientation == "outward":
        r = -r
    elif orientation != "inward":
        raise ValueError(f"orientation must be 'inward' or 'outward', got {orientation!r}")
    return ParaboloidCoeffs(c2=(r + m3) / 2.0, l1=-m1, l2=-m2, c0=(r - m3) / 2.0)


def sample_to_isotropic(s: SurfaceSample, eps: float = SOUTH_POLE_EPS) -> IsotropicSample:
    """Graph value and first partials of the plane-image surface at one sample.

    The tangent plane at (r, n) is n.p - n.r = 0, so the graph value is the
    plane's third coordinate; the first partials follow from differentiating
    the offset along the stereographic chart and are exact given (r, n).
    """
    n1, n2, n3 = float(s.n[0]), float(s.n[1]), float(s.n[2])
    if n3 <= -1.0 + eps:
        raise NormalAtSouthPole(f"normal n3={n3} too close to (0,0,-1)")
    w = n3 + 1.0
    r1, r2, r3 = float(s.r[0]), float(s.r[1]), float(s.r[2])
    ndotr = n1 * r1 + n2 * r2 + n3 * r3
    return IsotropicSample(
        x=n1 / w,
        y=n2 / w,
        f=-ndotr / w,
        fx=n1 * r3 / w - r1,
        fy=n2 * r3 / w - r2,
    )


def isotropic_to_contact_point(x: float, y: float, f: float, fx: float, fy: float) -> np.ndarray:
    """Design-space tangency point of the plane whose image is (x, y, f).

    Accepts the graph value and first partials directly so it works with
    both exact jets and fitted ones.
    """
    s = x * x + y * y + 1.0
    return (
        np.array(
            [
                (x * x - y * y - 1.0) * fx + 2.0 * x * y * fy - 2.0 * x * f,
                (y * y - x * x - 1.0) * fy + 2.0 * x * y * fx - 2.0 * y * f,
                2.0 * x * fx + 2.0 * y * fy - 2.0 * f,
            ]
        )
        / s
    )


def align_to_mean_normal(samples, tol: float = 1e-9):
    """Rotate samples so the normalized mean normal becomes (0, 0, 1).

    Returns (rotation, rotated_samples) where rotation is the minimal
    (axis-angle) rotation taking the mean normal to +z. Raises
    DegenerateMeanNormal when the mean normal is numerically zero
    (antipodally balanced sampling).
    """
    normals = np.array([s.n for s in samples], dtype=float)
    if len(normals) == 0:
        raise DegenerateMeanNormal("no samples")
    mean = normals.mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm < tol:
        raise DegenerateMeanNormal(f"|mean normal| = {norm:.3e}")
    m = mean / norm
    rot = rotation_to_z(m)
    rotated = [SurfaceSample(rot @ s.r, rot @ s.n) for s in samples]
    return rot, rotated


def rotation_to_z(m) -> np.ndarray:
    """Minimal rotation taking unit vector m to (0, 0, 1)."""
    m = np.asarray(m, dtype=float)
    c = float(m[2])
    if c < -1.0 + 1e-12:
        # 180 degrees; any axis in the xy-plane works, pick x.
        return np.diag([1.0, -1.0, -1.0])
    w = np.array([m[1], -m[0], 0.0])  # m x z
    wx = np.array([[0.0, 0.0, w[1]], [0.0, 0.0, -w[0]], [-w[1], w[0], 0.0]])
    return np.eye(3) + wx + (wx @ wx) / (1.0 + c)


def offset_samples(samples, distance: float):
    """Move each sample along its own normal; normals are unchanged."""
    return [SurfaceSample(s.r + distance * s.n, s.n) for s in samples]


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def angle_between(a, b) -> float:
    a = unit(a)
    b = unit(b)
    return math.atan2(float(np.linalg.norm(np.cross(a, b))), float(np.dot(a, b)))
