import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mapfollow.core import (L_MAX, L_MIN, OccupancyGridMap, Point2, Pose2, Scan, TrackerConfig, beam_count,
                            normalize_angle, scan_to_points, transform_point)

finite = st.floats(-50, 50, allow_nan=False)
angle = st.floats(-10, 10, allow_nan=False)


def test_transform_point_examples():
    assert transform_point(Point2(1, 0), Pose2()) == Point2(1, 0)
    p = transform_point(Point2(1, 0), Pose2(0, 0, math.pi / 2))
    assert p.x == pytest.approx(0, abs=1e-12) and p.y == pytest.approx(1)
    p = transform_point(Point2(1, 1), Pose2(2, 3, math.pi))
    assert p.x == pytest.approx(1) and p.y == pytest.approx(2)


@given(finite, finite, finite, finite, angle)
def test_transform_roundtrip(px, py, x, y, th):
    T = Pose2(x, y, th)
    q = transform_point(transform_point(Point2(px, py), T), T.inverse())
    assert abs(q.x - px) < 1e-9 and abs(q.y - py) < 1e-9


@given(angle)
def test_normalize_angle_range(th):
    a = normalize_angle(th)
    assert -math.pi < a <= math.pi
    assert math.isclose(math.cos(a), math.cos(th), abs_tol=1e-9)
    assert math.isclose(math.sin(a), math.sin(th), abs_tol=1e-9)


def test_pose_normalized_on_construction():
    assert Pose2(0, 0, -math.pi).theta == pytest.approx(math.pi)
    assert Pose2(0, 0, 3 * math.pi).theta == pytest.approx(math.pi)


@given(finite, finite, angle, finite, finite, angle)
def test_compose_relative_inverse(x1, y1, t1, x2, y2, t2):
    a, b = Pose2(x1, y1, t1), Pose2(x2, y2, t2)
    c = a.compose(b.relative_to(a))
    assert c.distance_to(b) < 1e-9
    assert abs(normalize_angle(c.theta - b.theta)) < 1e-9


def test_lidar_beam_count():
    assert beam_count(-math.radians(135), math.radians(135), math.radians(0.25)) == 1081


def _one_beam(r, bearing=0.0):
    return Scan.from_ranges(0.0, [r], angle_min=bearing, angle_max=bearing, angle_increment=0.01)


def test_scan_to_points_examples():
    pts = scan_to_points(_one_beam(5.0))
    assert len(pts) == 1 and pts[0].x == pytest.approx(5) and pts[0].y == pytest.approx(0)
    assert scan_to_points(Scan.from_ranges(0.0, [np.nan] * 1081)) == []
    pts = scan_to_points(_one_beam(2.0, math.pi / 2), Pose2(1, 0, 0))
    assert pts[0].x == pytest.approx(1) and pts[0].y == pytest.approx(2)


@given(st.lists(st.one_of(st.floats(0.1, 30.0), st.just(float("nan")), st.just(50.0)), min_size=1, max_size=60))
def test_scan_points_count(ranges):
    n = len(ranges)
    scan = Scan.from_ranges(0.0, ranges, angle_min=0.0, angle_max=0.01 * (n - 1) + 1e-12, angle_increment=0.01)
    pts = scan_to_points(scan)
    assert len(pts) <= scan.n_beams
    assert (len(pts) == scan.n_beams) == bool(scan.valid.all())


def test_scan_rejects_bad_lengths_and_ranges():
    with pytest.raises(ValueError):
        Scan(0.0, 0.0, 1.0, 0.5, np.ones(2), np.ones(2, bool))
    with pytest.raises(ValueError):
        Scan(0.0, 0.0, 1.0, 0.5, np.array([1.0, 1.0, 40.0]), np.ones(3, bool))


def test_tracker_config_defaults():
    c = TrackerConfig()
    assert (c.alpha, c.beta, c.gamma, c.delta, c.epsilon, c.zeta, c.c_min, c.q, c.r) == \
        (0.13, 3, 0.3, 0.5, 0.9, 0.35, 0.1, 0.05, 0.1)
    with pytest.raises(ValueError):
        TrackerConfig(gamma=1.5)
    with pytest.raises(ValueError):
        TrackerConfig(alpha=0.0)


def test_grid_masks_and_clamp_constants():
    g = OccupancyGridMap.centered(0.02, 1.0, 1.0)
    assert (L_MIN, L_MAX) == (-5.0, 5.0)
    assert g.unknown_mask().all()
    g.cells[0, 0] = 1.0
    g.cells[0, 1] = -1.0
    g.observed[0, :2] = True
    assert g.occupied_mask()[0, 0] and g.free_mask()[0, 1]
    assert not g.unknown_mask()[0, 0] and not g.unknown_mask()[0, 1]


def test_grid_world_to_cell_roundtrip():
    g = OccupancyGridMap.centered(0.02, 2.0, 2.0)
    ix, iy = np.array([3, 40]), np.array([7, 11])
    c = g.cell_centers(ix, iy)
    back = g.world_to_cell(c)
    assert np.array_equal(back[:, 0], ix) and np.array_equal(back[:, 1], iy)


def test_grid_grows_without_moving_content():
    g = OccupancyGridMap.centered(0.1, 2.0, 2.0)
    g.cells[5, 5] = 3.0
    p = g.cell_centers(np.array([5]), np.array([5]))
    assert g.grow_to_include(-10.0, -1.0, 1.0, 1.0)
    ix, iy = g.world_to_cell(p)[0]
    assert g.cells[iy, ix] == 3.0
