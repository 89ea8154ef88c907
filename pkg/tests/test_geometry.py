import math

import numpy as np

from polyclass.geometry import (
    RangeHull,
    convex_hull,
    cross,
    hull_width,
    hull_width_leq,
    point_segment_dist_sq,
    range_width,
    shoelace_area,
)


class TestConvexHull:
    def test_square_with_interior_points(self):
        pts = [(0, 0), (4, 0), (4, 4), (0, 4), (2, 2), (1, 3)]
        hull = convex_hull(pts)
        assert set(hull) == {(0, 0), (4, 0), (4, 4), (0, 4)}

    def test_collinear_reduced_to_endpoints(self):
        assert convex_hull([(0, 0), (1, 1), (2, 2), (3, 3)]) == [(0, 0), (3, 3)]

    def test_duplicates_tolerated(self):
        assert convex_hull([(1, 1), (1, 1), (1, 1)]) == [(1, 1)]

    def test_counterclockwise_order(self):
        hull = convex_hull([(0, 0), (3, 0), (3, 3), (0, 3)])
        area = shoelace_area(hull)
        assert area > 0


class TestWidth:
    def test_segment_width_zero(self):
        assert hull_width(convex_hull([(0, 0), (5, 5)])) == 0.0
        assert range_width([(0, 0), (3, 0), (7, 0)]) == 0.0

    def test_unit_band(self):
        # points on two horizontal lines 1 apart: width exactly 1
        pts = [(x, 0) for x in range(10)] + [(x, 1) for x in range(10)]
        assert range_width(pts) == 1.0
        assert hull_width_leq(convex_hull(pts), 1.0)
        assert not hull_width_leq(convex_hull(pts), 0.999)

    def test_triangle_altitude(self):
        # right triangle legs 3, 4: min width is the altitude 12/5
        hull = convex_hull([(0, 0), (4, 0), (0, 3)])
        assert math.isclose(hull_width(hull), 12 / 5, rel_tol=1e-12)

    def test_matches_direction_sweep_oracle(self, rng):
        for _ in range(50):
            pts = [tuple(p) for p in rng.integers(0, 30, size=(12, 2))]
            hull = convex_hull(pts)
            got = hull_width(hull)
            # dense direction sweep: min over angles of support extent
            arr = np.asarray(pts, dtype=float)
            best = np.inf
            for theta in np.linspace(0, np.pi, 3600, endpoint=False):
                d = np.array([np.sin(theta), -np.cos(theta)])  # normal direction
                proj = arr @ d
                best = min(best, proj.max() - proj.min())
            assert got <= best + 1e-9
            # sweep granularity: first-order error ~ extent * dtheta at kinks
            assert abs(got - best) < 40 * (np.pi / 3600) * 1.5


class TestRangeHull:
    def test_incremental_matches_batch(self, rng):
        pts = [tuple(p) for p in rng.integers(0, 40, size=(30, 2))]
        rh = RangeHull()
        for i, p in enumerate(pts):
            rh.append(p)
            assert set(rh.hull) == set(convex_hull(pts[: i + 1]))

    def test_popleft_matches_batch(self, rng):
        pts = [tuple(p) for p in rng.integers(0, 40, size=(20, 2))]
        rh = RangeHull(pts)
        for start in range(1, 15):
            rh.popleft()
            assert set(rh.hull) == set(convex_hull(pts[start:]))


def test_shoelace_signs():
    ccw = [(0, 0), (2, 0), (2, 2), (0, 2)]
    assert shoelace_area(ccw) == 4.0
    assert shoelace_area(list(reversed(ccw))) == -4.0


def test_point_segment_distance():
    assert point_segment_dist_sq((0, 1), (0, 0), (2, 0)) == 1.0
    assert point_segment_dist_sq((5, 0), (0, 0), (2, 0)) == 9.0  # clamped to endpoint
    assert point_segment_dist_sq((1, 0), (1, 0), (1, 0)) == 0.0  # degenerate segment


def test_cross_orientation():
    assert cross((0, 0), (1, 0), (0, 1)) > 0  # left turn
    assert cross((0, 0), (0, 1), (1, 0)) < 0
    assert cross((0, 0), (1, 1), (2, 2)) == 0
