import math

import numpy as np
import pytest
from shapely.geometry import Polygon

from robust_pursuit import geometry as geo

from conftest import random_interior_point


UNIT_SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]


class TestValidateEnvironment:
    def test_accepts_ccw_outer(self):
        env = geo.validate_environment(UNIT_SQUARE)
        assert env.holes == ()
        assert env.area == pytest.approx(1.0)

    def test_normalizes_cw_outer(self):
        env = geo.validate_environment(list(reversed(UNIT_SQUARE)))
        # outer ring is stored counterclockwise regardless of input order
        assert geo._ring_area(env.outer) > 0

    def test_hole_orientation_normalized(self):
        hole = [(0.25, 0.25), (0.75, 0.25), (0.75, 0.75), (0.25, 0.75)]
        env = geo.validate_environment([(0, 0), (4, 0), (4, 4), (0, 4)], [hole])
        assert geo._ring_area(env.holes[0]) < 0
        env2 = geo.validate_environment(
            [(0, 0), (4, 0), (4, 4), (0, 4)], [list(reversed(hole))]
        )
        assert geo._ring_area(env2.holes[0]) < 0

    def test_rejects_self_intersection(self):
        bowtie = [(0, 0), (2, 2), (2, 0), (0, 2)]
        with pytest.raises(geo.SelfIntersecting):
            geo.validate_environment(bowtie)

    def test_rejects_hole_outside(self):
        hole = [(5, 5), (6, 5), (6, 6), (5, 6)]
        with pytest.raises(geo.HoleOutsideOuter):
            geo.validate_environment(UNIT_SQUARE, [hole])

    def test_rejects_overlapping_holes(self):
        outer = [(0, 0), (10, 0), (10, 10), (0, 10)]
        h1 = [(2, 2), (5, 2), (5, 5), (2, 5)]
        h2 = [(4, 4), (7, 4), (7, 7), (4, 7)]
        with pytest.raises(geo.OverlappingHoles):
            geo.validate_environment(outer, [h1, h2])

    def test_rejects_degenerate_edge(self):
        with pytest.raises(geo.DegenerateEdge):
            geo.validate_environment([(0, 0), (1, 0), (1, 0), (0, 1)])

    def test_rejects_too_few_vertices(self):
        with pytest.raises(geo.GeometryError):
            geo.validate_environment([(0, 0), (1, 0)])

    def test_default_epsilon_scales_with_diameter(self):
        env = geo.validate_environment(UNIT_SQUARE)
        assert env.epsilon == pytest.approx(1e-9 * math.sqrt(2))
        big = geo.validate_environment([(0, 0), (100, 0), (100, 100), (0, 100)])
        assert big.epsilon == pytest.approx(1e-9 * math.sqrt(2) * 100)

    def test_load_roundtrip(self, tmp_path):
        env = geo.validate_environment(UNIT_SQUARE)
        path = tmp_path / "env.json"
        path.write_text(__import__("json").dumps(env.to_dict()))
        loaded = geo.load_environment(path)
        assert loaded.outer == env.outer
        assert loaded.epsilon == env.epsilon


class TestMembership:
    def test_interior_boundary_exterior(self, lshape_env):
        pts = np.array(
            [
                [0.5, 0.5],   # interior of the bottom leg
                [1.5, 0.5],   # interior of the bottom leg, right half
                [0.5, 1.5],   # interior of the left leg
                [1.5, 1.5],   # inside the notch: outside free space
                [1.0, 0.0],   # on the outer boundary
                [1.0, 1.5],   # on the notch boundary
                [3.0, 3.0],   # far outside
                [-0.1, 0.5],  # just outside
            ]
        )
        got = geo.points_in_env(lshape_env, pts)
        assert got.tolist() == [True, True, True, False, True, True, False, False]

    def test_margin_excludes_near_boundary(self, lshape_env):
        pts = np.array([[0.001, 0.5], [0.5, 0.5]])
        assert geo.points_in_env(lshape_env, pts, margin=0.01).tolist() == [False, True]
        assert geo.points_in_env(lshape_env, pts).tolist() == [True, True]

    def test_contains_point_on_hole_boundary(self, comb_env):
        v = comb_env.holes[0][0]
        assert geo.contains_point(comb_env, v)


class TestSegments:
    def test_notch_segment_excluded(self, lshape_env):
        # crosses the missing top-right quadrant
        assert not geo.contains_segment(lshape_env, (0.5, 1.8), (1.8, 0.5))

    def test_grazing_segment_allowed(self, lshape_env):
        # touches the reflex corner (1,1) exactly: free space is closed
        assert geo.contains_segment(lshape_env, (0.4, 1.6), (1.6, 0.4))

    def test_interior_segment(self, lshape_env):
        assert geo.contains_segment(lshape_env, (0.2, 0.2), (1.8, 0.8))

    def test_boundary_edge_segment(self, lshape_env):
        assert geo.contains_segment(lshape_env, (0.0, 0.0), (2.0, 0.0))

    def test_endpoint_outside(self, lshape_env):
        assert not geo.contains_segment(lshape_env, (0.5, 0.5), (2.5, 0.5))

    def test_batched_matches_scalar(self, comb_env):
        rng = np.random.default_rng(3)
        pts = np.array([random_interior_point(comb_env, rng) for _ in range(24)])
        a, b = pts[:12], pts[12:]
        batch = geo.segments_in_env(comb_env, a, b)
        single = np.array(
            [geo.contains_segment(comb_env, p, q) for p, q in zip(a, b)]
        )
        assert np.array_equal(batch, single)

    def test_segment_through_hole_excluded(self, comb_env):
        hull = Polygon(comb_env.holes[0]).convex_hull
        c = hull.representative_point()
        a = np.array([c.x - 0.5, c.y])
        b = np.array([c.x + 0.5, c.y])
        if geo.contains_point(comb_env, a) and geo.contains_point(comb_env, b):
            assert not geo.contains_segment(comb_env, a, b) or not Polygon(
                comb_env.holes[0]
            ).crosses(
                __import__("shapely").geometry.LineString([tuple(a), tuple(b)])
            )


class TestVisibilityPolygon:
    def test_convex_sees_everything(self, convex_env):
        q = (2.0, 2.0)
        vp = geo.visibility_polygon(convex_env, q)
        assert vp.shape.area == pytest.approx(convex_env.area, rel=1e-9)

    def test_lshape_known_region(self, lshape_env):
        # from (0.5, 1.8) the reflex corner (1,1) occludes part of the bottom
        # leg; the window edge ends at x = 0.5 + (1.8/0.8) * 0.5 = 1.625 on y=0
        vp = geo.visibility_polygon(lshape_env, (0.5, 1.8))
        expect = Polygon([(0, 0), (1.625, 0), (1, 1), (1, 2), (0, 2)])
        sym = vp.shape.symmetric_difference(expect).area
        assert sym < 1e-9
        assert vp.shape.area == pytest.approx(2.3125, abs=1e-9)

    def test_viewpoint_outside_raises(self, lshape_env):
        with pytest.raises(geo.ViewpointOutside):
            geo.visibility_polygon(lshape_env, (1.5, 1.5))

    def test_boundary_viewpoint_nudged(self, lshape_env):
        vp = geo.visibility_polygon(lshape_env, (0.0, 0.5))
        assert vp.shape.area > 0

    def test_membership_agrees_with_segment_test(self, lshape_env, comb_env):
        rng = np.random.default_rng(11)
        for env in (lshape_env, comb_env):
            for _ in range(5):
                q = random_interior_point(env, rng)
                vp = geo.visibility_polygon(env, q)
                pts = np.array(
                    [random_interior_point(env, rng) for _ in range(60)]
                )
                claimed = vp.contains_points(pts, tol=env.epsilon)
                truth = np.array(
                    [geo.contains_segment(env, q, p) for p in pts]
                )
                disputed = claimed != truth
                # only boundary-grazing points may disagree within tolerance
                for p in pts[disputed]:
                    assert vp.shape.exterior.distance(
                        __import__("shapely").geometry.Point(p)
                    ) < 10 * env.epsilon

    def test_hole_blocks_sight(self, comb_env):
        hole = Polygon(comb_env.holes[0])
        q = (5.0, 1.5)
        vp = geo.visibility_polygon(comb_env, q)
        assert vp.shape.area < comb_env.area - hole.area / 2


class TestShadows:
    def test_convex_no_shadows(self, convex_env):
        ss = geo.shadow_set(convex_env, [(2.0, 2.0)])
        assert len(ss) == 0

    def test_lshape_single_shadow(self, lshape_env):
        ss = geo.shadow_set(lshape_env, [(0.5, 1.8)])
        assert len(ss) == 1
        # complement of the visible region within the free space
        assert ss[0].area == pytest.approx(3.0 - 2.3125, abs=1e-9)
        assert ss[0].covers_point((1.9, 0.1))

    def test_two_viewpoints_clear_lshape(self, lshape_env):
        ss = geo.shadow_set(lshape_env, [(0.5, 1.8), (1.8, 0.5)])
        assert len(ss) == 0

    def test_canonical_order_stable(self, comb_env):
        pts = [(5.0, 1.5), (2.0, 9.5)]
        a = geo.shadow_set(comb_env, pts)
        b = geo.shadow_set(comb_env, pts)
        assert len(a) == len(b)
        for sa, sb in zip(a, b):
            assert sa.bounds == sb.bounds
            assert sa.area == pytest.approx(sb.area)

    def test_order_key_is_geometric(self, comb_env):
        ss = geo.shadow_set(comb_env, [(5.0, 1.5)])
        keys = [(round(s.bounds[0], 9), round(s.bounds[1], 9)) for s in ss]
        assert keys == sorted(keys)

    def test_sliver_filtered(self, lshape_env):
        # viewpoints covering everything except numeric dust leave no shadows
        ss = geo.shadow_set(
            lshape_env, [(0.5, 1.8), (1.8, 0.5), (0.99, 0.99)]
        )
        assert len(ss) == 0
