"""Tests for oriented-rectangle geometry."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskdrive import geom
from riskdrive.geom import OrientedRect, Pose2D


def rect(x=0.0, y=0.0, heading=0.0, length=5.0, width=2.0):
    return OrientedRect(Pose2D(x, y, heading), length, width)


def polygon_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


class TestNormalizeAngle:
    @given(st.floats(-1e6, 1e6))
    def test_result_in_half_open_interval(self, theta):
        w = geom.normalize_angle(theta)
        assert -math.pi < w <= math.pi

    @given(st.floats(-50.0, 50.0), st.integers(-5, 5))
    def test_invariant_under_full_turns(self, theta, k):
        a = geom.normalize_angle(theta)
        b = geom.normalize_angle(theta + 2 * math.pi * k)
        assert abs(a - b) < 1e-9 or abs(abs(a - b) - 2 * math.pi) < 1e-9

    def test_boundary_maps_to_pi(self):
        assert geom.normalize_angle(math.pi) == pytest.approx(math.pi)
        assert geom.normalize_angle(-math.pi) == pytest.approx(math.pi)


class TestPose2D:
    def test_heading_normalized_on_construction(self):
        assert Pose2D(0, 0, 3 * math.pi).heading == pytest.approx(math.pi)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            Pose2D(math.nan, 0, 0)


class TestOrientedRect:
    def test_width_longer_than_length_rejected(self):
        with pytest.raises(ValueError):
            OrientedRect(Pose2D(0, 0, 0), 2.0, 5.0)

    def test_zero_width_rejected(self):
        with pytest.raises(ValueError):
            OrientedRect(Pose2D(0, 0, 0), 5.0, 0.0)


class TestCorners:
    def test_axis_aligned_corner_coordinates(self):
        poly = geom.corners(rect(1.0, 2.0, 0.0, 4.0, 2.0))
        expected = {(3.0, 3.0), (-1.0, 3.0), (-1.0, 1.0), (3.0, 1.0)}
        assert {(round(x, 9), round(y, 9)) for x, y in poly} == expected

    def test_counterclockwise_orientation(self):
        for heading in np.linspace(-3, 3, 7):
            poly = geom.corners(rect(heading=heading))
            assert polygon_area(poly) > 0

    def test_rotation_preserves_center_and_dimensions(self):
        poly = geom.corners(rect(3, -2, 0.7))
        assert np.allclose(poly.mean(axis=0), [3, -2])
        assert np.linalg.norm(poly[0] - poly[1]) == pytest.approx(5.0)
        assert np.linalg.norm(poly[1] - poly[2]) == pytest.approx(2.0)

    def test_scale_inflates_about_center(self):
        base = geom.corners(rect())
        scaled = geom.corners(rect(), scale=1.5)
        assert np.allclose(scaled, base * 1.5)

    def test_scale_below_one_rejected(self):
        with pytest.raises(ValueError, match="scale"):
            geom.corners(rect(), scale=0.9)


class TestSatIntersects:
    def test_clear_overlap_and_clear_separation(self):
        a = geom.corners(rect(0, 0))
        assert geom.sat_intersects(a, geom.corners(rect(1, 0)))
        assert not geom.sat_intersects(a, geom.corners(rect(100, 0)))

    def test_touching_edges_count_as_overlap(self):
        a = geom.corners(rect(0, 0, 0, 4, 2))
        b = geom.corners(rect(4.0, 0, 0, 4, 2))  # shared edge at x = 2
        assert geom.sat_intersects(a, b)

    def test_rotated_cross_configuration(self):
        # two long thin boxes crossing at 90 degrees overlap even though
        # neither center is inside the other
        a = geom.corners(rect(0, 0, 0.0, 10, 1))
        b = geom.corners(rect(0, 0, math.pi / 2, 10, 1))
        assert geom.sat_intersects(a, b)

    def test_diagonal_near_miss_requires_both_axis_sets(self):
        # axis-aligned box vs a rotated box whose AABBs overlap but the
        # rotated box's own axes separate them
        a = geom.corners(rect(0, 0, 0, 2, 2))
        b = geom.corners(rect(2.6, 2.6, math.pi / 4, 4, 1))
        assert not geom.sat_intersects(a, b)

    def test_symmetric(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            a = geom.corners(rect(rng.uniform(-3, 3), rng.uniform(-3, 3),
                                  rng.uniform(-math.pi, math.pi)))
            b = geom.corners(rect(rng.uniform(-3, 3), rng.uniform(-3, 3),
                                  rng.uniform(-math.pi, math.pi)))
            assert geom.sat_intersects(a, b) == geom.sat_intersects(b, a)

    def test_containment_detected(self):
        outer = geom.corners(rect(0, 0, 0.3, 20, 10))
        inner = geom.corners(rect(0.5, 0.5, 1.2, 2, 1))
        assert geom.sat_intersects(outer, inner)


class TestCoverCircles:
    def test_centers_on_heading_axis_at_quarter_length(self):
        centers, radius = geom.cover_circles(rect(1, 1, math.pi / 2, 4, 2))
        assert np.allclose(sorted(centers[:, 1]), [0.0, 2.0])
        assert np.allclose(centers[:, 0], 1.0)
        assert radius == pytest.approx(math.hypot(1.0, 1.0))

    def test_circles_cover_all_corners(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            r = rect(rng.uniform(-5, 5), rng.uniform(-5, 5),
                     rng.uniform(-math.pi, math.pi),
                     rng.uniform(2, 6), rng.uniform(1, 2))
            centers, radius = geom.cover_circles(r)
            for corner in geom.corners(r):
                d = np.linalg.norm(centers - corner, axis=1).min()
                assert d <= radius + 1e-9


class TestVehicleClearance:
    def test_matches_brute_force_four_distance_minimum(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            a = rect(rng.uniform(-20, 20), rng.uniform(-20, 20),
                     rng.uniform(-math.pi, math.pi))
            b = rect(rng.uniform(-20, 20), rng.uniform(-20, 20),
                     rng.uniform(-math.pi, math.pi))
            ca, ra = geom.cover_circles(a)
            cb, rb = geom.cover_circles(b)
            expected = min(np.linalg.norm(p - q) for p in ca for q in cb) - ra - rb
            assert geom.vehicle_clearance(a, b) == pytest.approx(expected)

    def test_far_apart_positive_overlapping_negative(self):
        assert geom.vehicle_clearance(rect(0, 0), rect(100, 0)) > 0
        assert geom.vehicle_clearance(rect(0, 0), rect(0.5, 0)) < 0

    @settings(max_examples=50)
    @given(st.floats(-30, 30), st.floats(-30, 30), st.floats(-3, 3))
    def test_symmetric_under_argument_swap(self, x, y, heading):
        a = rect(0, 0, 0.0)
        b = rect(x, y, heading)
        assert geom.vehicle_clearance(a, b) == pytest.approx(
            geom.vehicle_clearance(b, a))
