import math

import numpy as np
import pytest

from coneflank import (
    ConicCandidate,
    Jet4,
    ToolBounds,
    build_cone_at,
    cone_axis,
    cone_side,
    cone_vertex,
    expression_jet_provider,
    integrate_isotropic_circle,
    integrate_ruling_developable,
    integrate_ruling_ruled,
    inverse_stereographic,
    isotropic_to_contact_point,
    jet_of_expression,
    parse_expression,
    tool_length_check,
)
from coneflank.errors import (
    AmbiguousSide,
    DegenerateDenominator,
    InvalidBounds,
    MultipleRoot,
    NoRealRuling,
    SingularSystem,
    ZeroHessian,
)
from coneflank.reconstruct import axis_residual, build_cone_candidates

from conftest import THETA30, exact_family_conic_params, fit_circle_to_points, plane_offset_from_graph

SQ3 = math.sqrt(3.0)


def _family_conic(x, y, theta=THETA30):
    fam = exact_family_conic_params(x, y)
    return ConicCandidate(x, y, fam["z"], fam["u"], fam["v"], fam["a"], fam["b"], theta)


def _incidence_residual(conic, m, n_samples=32):
    """max |n(t).m + h(t)| over the conic: the vertex lies on every plane."""
    worst = 0.0
    for k in range(n_samples):
        t = 2.0 * math.pi * k / n_samples
        xt, yt, zt = conic.point(t)
        n, h = plane_offset_from_graph(xt, yt, zt)
        worst = max(worst, abs(float(np.dot(n, m)) + h))
    return worst


class TestVertex:
    def test_worked_example(self):
        c = _family_conic(SQ3, 0.0)
        m = cone_vertex(c)
        assert np.allclose(m, [-2.0 / SQ3, 0.0, -2.0], atol=1e-12)
        assert _incidence_residual(c, m) < 1e-12

    def test_mirrored_example(self):
        # swapping the two top-view coordinates maps conics to conics and
        # (by the same tangent-plane oracle) vertices to swapped vertices
        c = ConicCandidate(0.0, SQ3, 0.0, 0.0, -SQ3 / 2.0, 0.0, 0.5, THETA30)
        m = cone_vertex(c)
        assert np.allclose(m, [0.0, -2.0 / SQ3, -2.0], atol=1e-12)
        assert _incidence_residual(c, m) < 1e-12

    def test_vertex_on_all_tangent_planes_generic(self):
        for phi in (0.3, 1.1, 2.7, 4.5):
            c = _family_conic(SQ3 * math.cos(phi), SQ3 * math.sin(phi))
            m = cone_vertex(c)
            assert _incidence_residual(c, m) < 1e-10

    def test_degenerate_center(self):
        c = ConicCandidate(0.5, 0.2, 0.1, 0.0, 0.0, 0.0, 0.0, THETA30)
        with pytest.raises(DegenerateDenominator):
            cone_vertex(c)

    def test_reparametrization_invariance(self):
        # anchoring the same conic at another of its points keeps the vertex
        x, y = SQ3 * math.cos(0.8), SQ3 * math.sin(0.8)
        c1 = _family_conic(x, y)
        m1 = cone_vertex(c1)
        t0 = 1.3
        x2, y2, z2 = c1.point(t0)
        # the same top-view circle seen from the shifted anchor
        cx, cy = c1.top_center()
        u2, v2 = cx - x2, cy - y2
        fam2 = exact_family_conic_params(x2, y2)  # same family member by construction
        c2 = ConicCandidate(x2, y2, z2, u2, v2, fam2["a"], fam2["b"], THETA30)
        m2 = cone_vertex(c2)
        assert np.allclose(m1, m2, atol=1e-9)


class TestAxis:
    def test_worked_example_axis(self):
        c = _family_conic(SQ3, 0.0)
        a = cone_axis(c)
        assert np.allclose(a, [SQ3 / 2.0, 0.0, 0.5], atol=1e-12)
        assert axis_residual(c, a) < 1e-10
        m = cone_vertex(c)
        r = np.zeros(3)
        ang = math.acos(float(np.dot(a, (r - m) / np.linalg.norm(r - m))))
        assert ang == pytest.approx(THETA30, abs=1e-12)

    def test_axis_through_sphere_center(self):
        # conics on the unit-sphere image yield cones circumscribing it
        prov = expression_jet_provider("0.5*(x^2+y^2+1)")
        x, y = 0.4, 0.1
        j = prov(x, y)
        from coneflank.contact import solve_hyperosculating

        rep = solve_hyperosculating(x, y, j, THETA30)
        u, v = rep.family_points(64)[5]
        c = ConicCandidate.from_jet(x, y, j, u, v, THETA30)
        m = cone_vertex(c)
        a = cone_axis(c)
        # line m + s a passes through the origin (the sphere center)
        s_star = -float(np.dot(m, a))
        assert np.linalg.norm(m + s_star * a) < 1e-9

    def test_coincident_probes_singular(self):
        c = _family_conic(SQ3, 0.0)
        with pytest.raises(SingularSystem):
            cone_axis(c, probes=(0.1, 0.1, 0.1))


class TestSideAndLength:
    def test_worked_example_side(self):
        c = _family_conic(SQ3, 0.0)
        m = cone_vertex(c)
        r = np.zeros(3)
        assert cone_side(c, m, r) == 1

    def test_opposite_configuration_flips(self):
        c = _family_conic(SQ3, 0.0)
        m = cone_vertex(c)
        r = np.zeros(3)
        side = cone_side(c, m, r)
        # moving the contact point to the other side of the vertex flips it
        mirrored = 2 * m - r
        assert cone_side(c, m, mirrored) == -side

    def test_grazing_ambiguous(self):
        c = _family_conic(SQ3, 0.0)
        m = cone_vertex(c)
        with pytest.raises(AmbiguousSide):
            cone_side(c, m, m)

    def test_tool_length(self):
        m = np.array([-2.0 / SQ3, 0.0, -2.0])
        r = np.zeros(3)
        assert tool_length_check(m, r, ToolBounds(1.0, 3.0))
        assert not tool_length_check(m, r, ToolBounds(0.1, 1.0))
        with pytest.raises(InvalidBounds):
            ToolBounds(2.0, 1.0)


class TestDevelopableRuling:
    def test_parabolic_cylinder(self):
        prov = expression_jet_provider("x^2")
        tr = integrate_ruling_developable(prov, (0.5, 0.0), step=0.02, length=0.8)
        assert tr.reports["straightness"] < 1e-12
        d = np.asarray(tr.points[-1]) - np.asarray(tr.points[0])
        assert abs(d[0]) < 1e-12  # ruling along the y-axis

    def test_rotated_cylinder(self):
        prov = expression_jet_provider("(x+y)^2")
        tr = integrate_ruling_developable(prov, (0.4, -0.1), step=0.02, length=0.8)
        assert tr.reports["straightness"] < 1e-10
        d = np.asarray(tr.points[-1]) - np.asarray(tr.points[0])
        assert abs(d[0] + d[1]) < 1e-10  # direction (1,-1)

    def test_cone_graph_radial_rulings(self):
        prov = expression_jet_provider("sqrt(x^2+y^2)")
        seed = (1.0, 0.5)
        tr = integrate_ruling_developable(prov, seed, step=0.01, length=0.5)
        assert tr.reports["straightness"] < 1e-8
        assert tr.reports["tangent_variation"] < 1e-8
        d = np.asarray(tr.points[-1]) - np.asarray(tr.points[0])
        cross = d[0] * seed[1] - d[1] * seed[0]
        assert abs(cross) < 1e-8  # radial direction

    def test_flat_jet_rejected(self):
        prov = expression_jet_provider("x+2*y")
        with pytest.raises(ZeroHessian):
            integrate_ruling_developable(prov, (0.0, 0.0))

    def test_step_length_uniform(self):
        prov = expression_jet_provider("x^2")
        tr = integrate_ruling_developable(prov, (0.5, 0.0), step=0.02, length=0.4)
        pts = np.asarray(tr.points)
        steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        assert np.all(np.abs(steps - 0.02) < 0.1 * 0.02)


class TestRuledRuling:
    def test_saddle_along_axis(self):
        prov = expression_jet_provider("x*y")
        tr = integrate_ruling_ruled(prov, (1.0, 1.0), branch=(1.0, 0.0), step=0.02, length=0.8)
        assert tr.reports["straightness"] < 1e-12
        assert tr.reports["f_linearity"] < 1e-12
        assert all(abs(p[1] - 1.0) < 1e-12 for p in tr.points)

    def test_rational_ruled_graph(self):
        prov = expression_jet_provider("y/x")
        tr = integrate_ruling_ruled(prov, (1.0, 1.0), branch=(1.0, 1.0), step=0.02, length=0.6)
        assert tr.reports["straightness"] < 1e-9
        assert tr.reports["f_linearity"] < 1e-9

    def test_positive_curvature_rejected(self):
        prov = expression_jet_provider("x^2+y^2")
        with pytest.raises(NoRealRuling):
            integrate_ruling_ruled(prov, (0.3, 0.3))


class TestCircleTrace:
    def test_worked_example_circle(self, envelope_provider):
        seed = (SQ3, 0.0)
        rc = (-SQ3 / 2.0, 0.0)
        fwd = integrate_isotropic_circle(envelope_provider, seed, THETA30, root_choice=rc,
                                         arc_fraction=0.40, direction=+1)
        back = integrate_isotropic_circle(envelope_provider, seed, THETA30, root_choice=rc,
                                          arc_fraction=0.40, direction=-1)
        center, radius, dev = fit_circle_to_points(list(fwd.points) + list(back.points))
        assert abs(radius - SQ3 / 2.0) < 1e-6
        assert abs(math.hypot(*center) - radius) < 1e-6  # passes through the origin
        assert dev < 1e-6
        assert fwd.reports["f_consistency"] < 1e-6

    def test_paraboloid_trace(self, sphere_provider):
        tot = 0.97 * 2.0 * math.pi
        tr = integrate_isotropic_circle(sphere_provider, (0.4, 0.2), math.pi / 5,
                                        root_choice=(0.9, 0.1), step=tot / 512)
        assert tr.reports["circularity"] < 1e-8
        assert tr.reports["f_consistency"] < 1e-8

    def test_reseeded_trace_reproduces_circle(self, envelope_provider):
        seed = (1.2 * math.cos(0.5), 1.2 * math.sin(0.5))
        fwd = integrate_isotropic_circle(envelope_provider, seed, THETA30, root_choice=0,
                                         arc_fraction=0.22, direction=+1)
        c1, r1, _ = fit_circle_to_points(fwd.points)
        p2 = tuple(fwd.points[40])
        guess = (c1[0] - p2[0], c1[1] - p2[1])
        tr2 = integrate_isotropic_circle(envelope_provider, p2, THETA30, root_choice=guess,
                                         arc_fraction=0.18, direction=+1)
        c2, r2, _ = fit_circle_to_points(tr2.points)
        assert math.hypot(c1[0] - c2[0], c1[1] - c2[1]) < 1e-6
        assert abs(r1 - r2) < 1e-6

    def test_multiple_root_gate(self):
        # persistent near-multiple roots with an explicit gate threshold
        prov = expression_jet_provider("0.5*(x^2+y^2+1) + 0.000000000001*x^3")
        with pytest.raises(MultipleRoot):
            integrate_isotropic_circle(prov, (0.4, 0.2), math.pi / 5, root_choice=0, mult_tol=1e-3)


class TestBuildCone:
    def test_full_chain_at_family_point(self, envelope_provider):
        built = build_cone_at(SQ3, 0.0, envelope_provider, THETA30, ToolBounds(1.0, 3.0))
        gen = min(built.cones, key=lambda s: np.linalg.norm(s.vertex - np.array([-2.0 / SQ3, 0.0, -2.0])))
        assert np.allclose(gen.vertex, [-2.0 / SQ3, 0.0, -2.0], atol=1e-9)
        assert np.allclose(gen.axis, [SQ3 / 2.0, 0.0, 0.5], atol=1e-9)
        assert np.allclose(gen.contact_point, [0.0, 0.0, 0.0], atol=1e-12)
        assert gen.feasible  # |m - r| = 4/sqrt(3) in [1, 3]
        assert gen.side == 1

    def test_six_cones_at_generic_point(self, envelope_provider):
        built = build_cone_at(1.1, 0.4, envelope_provider, THETA30)
        assert len(built.cones) == 6

    def test_cone_invariants(self, envelope_provider):
        built = build_cone_at(1.1, 0.4, envelope_provider, THETA30)
        for spec in built.cones:
            assert abs(np.linalg.norm(spec.axis) - 1.0) < 1e-12
            rm = spec.contact_point - spec.vertex
            n = inverse_stereographic(spec.conic.x, spec.conic.y)
            assert abs(float(np.dot(n, rm))) <= 1e-8 * np.linalg.norm(rm)
            ang = math.acos(max(-1, min(1, float(np.dot(spec.axis, rm / np.linalg.norm(rm))))))
            assert abs(ang - THETA30) < 1e-6
            assert spec.tangency_radius == pytest.approx(np.linalg.norm(rm) * math.sin(THETA30))

    def test_flat_graph_empty_with_reason(self):
        prov = expression_jet_provider("0.2*x + 0.1*y + 3")
        built = build_cone_at(0.1, 0.2, prov, THETA30)
        assert built.cones == []
        assert built.dropped and "identically-zero" in built.dropped[0][1]

    def test_candidate_builder_matches_strict_roots_on_exact_data(self, envelope_provider):
        cones = build_cone_candidates(1.1, 0.4, envelope_provider, THETA30)
        assert len(cones) == 6
        built = build_cone_at(1.1, 0.4, envelope_provider, THETA30)
        verts = sorted(tuple(np.round(c.vertex, 6)) for c in built.cones)
        verts2 = sorted(tuple(np.round(c.vertex, 6)) for c in cones)
        assert verts == verts2

    def test_contact_point_tangency(self, envelope_provider):
        j = envelope_provider(1.1, 0.4)
        r = isotropic_to_contact_point(1.1, 0.4, j.f, j.fx, j.fy)
        n, h = plane_offset_from_graph(1.1, 0.4, j.f)
        assert abs(float(np.dot(n, r)) + h) < 1e-12
