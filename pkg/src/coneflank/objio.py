"""Wavefront OBJ export of cones, traces, and surface grids; cloud re-import.

Everything is written in design-space coordinates. Cone frusta carry exact
per-vertex normals (vn records) oriented like the enveloped surface, so a
re-imported mesh is a valid oriented point-normal cloud.
"""

from __future__ import annotations

import math

import numpy as np

from .isomap import SurfaceSample, inverse_stereographic, unit


def _cone_frame(axis):
    """Orthonormal (b1, b2) spanning the plane perpendicular to the axis."""
    a = unit(axis)
    ref = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    b1 = unit(np.cross(a, ref))
    b2 = np.cross(a, b1)
    return a, b1, b2


def cone_frustum_mesh(spec, r_min, r_max, segments=64):
    """Vertices, normals, and quad faces of the truncated cone.

    The rulings run from slant distance r_min to r_max measured from the
    vertex. Normals are the exact cone normals, oriented to agree with the
    enveloped surface's oriented normal at the contact point.
    """
    a, b1, b2 = _cone_frame(spec.axis)
    ct, st = math.cos(spec.theta), math.sin(spec.theta)
    d_lo = max(r_min, 1e-9)
    n_surface = inverse_stereographic(spec.conic.x, spec.conic.y)
    # azimuth of the contact ruling fixes the normal orientation sign
    rm = spec.contact_point - spec.vertex
    e0 = rm - float(np.dot(rm, a)) * a
    e0 = unit(e0) if np.linalg.norm(e0) > 0 else b1
    sign = 1.0 if float(np.dot(ct * e0 - st * a, n_surface)) >= 0.0 else -1.0

    verts = []
    norms = []
    for d in (d_lo, r_max):
        for k in range(segments):
            phi = 2.0 * math.pi * k / segments
            e = math.cos(phi) * b1 + math.sin(phi) * b2
            verts.append(spec.vertex + d * (ct * a + st * e))
            norms.append(sign * (ct * e - st * a))
    faces = []
    for k in range(segments):
        k2 = (k + 1) % segments
        faces.append((k, k2, segments + k2, segments + k))
    return verts, norms, faces


def write_cones_obj(path, cones, r_min, r_max, segments=64):
    """One frustum group per cone, with v/vn records and quad faces."""
    with open(path, "w") as fh:
        fh.write("# coneflank cone frusta\n")
        offset = 0
        for idx, spec in enumerate(cones):
            verts, norms, faces = cone_frustum_mesh(spec, r_min, r_max, segments)
            fh.write(f"g cone_{idx}\n")
            for p in verts:
                fh.write(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
            for n in norms:
                fh.write(f"vn {n[0]:.17g} {n[1]:.17g} {n[2]:.17g}\n")
            for f in faces:
                rec = " ".join(f"{offset + i + 1}//{offset + i + 1}" for i in f)
                fh.write(f"f {rec}\n")
            offset += len(verts)


def write_polylines_obj(path, polylines):
    """Polylines (lists of 3-points) as OBJ 'l' records."""
    with open(path, "w") as fh:
        fh.write("# coneflank traces\n")
        offset = 0
        for line in polylines:
            for p in line:
                fh.write(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
            idx = " ".join(str(offset + i + 1) for i in range(len(line)))
            fh.write(f"l {idx}\n")
            offset += len(line)


def write_surface_grid_obj(path, grid_points, grid_normals, shape):
    """Quad grid of sampled surface points; shape = (rows, cols)."""
    rows, cols = shape
    with open(path, "w") as fh:
        fh.write("# coneflank surface grid\n")
        for p in grid_points:
            fh.write(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        for n in grid_normals:
            fh.write(f"vn {n[0]:.17g} {n[1]:.17g} {n[2]:.17g}\n")
        for i in range(rows - 1):
            for j in range(cols - 1):
                a = i * cols + j
                b = i * cols + j + 1
                c = (i + 1) * cols + j + 1
                d = (i + 1) * cols + j
                fh.write(f"f {a+1}//{a+1} {b+1}//{b+1} {c+1}//{c+1} {d+1}//{d+1}\n")


def read_point_normals_obj(path):
    """Re-import an OBJ written by this module as an oriented point cloud.

    Pairs v and vn records by index (this module always writes them in
    lockstep).
    """
    verts = []
    norms = []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(t) for t in parts[1:4]])
            elif parts[0] == "vn":
                norms.append([float(t) for t in parts[1:4]])
    if len(verts) != len(norms):
        raise ValueError(f"v/vn count mismatch: {len(verts)} vs {len(norms)}")
    return [SurfaceSample.of(r, n) for r, n in zip(verts, norms)]
