import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mapfollow.core import Pose2, scan_points_array
from mapfollow.simulator import (HIT_LEG, HIT_WALL, DriftParams, Odometer, Simulation, read_odometry,
                                 simulate_scan, step_world, unicycle)

from helpers import FORWARD, box_walls, pedestrian, room


def test_step_world_examples():
    w = room()
    assert step_world(w, (0.0, 0.0), 0.3).robot_truth == w.robot_truth
    w2 = step_world(room(Pose2(1, 1, 0)), (1.0, 0.0), 0.5)
    assert w2.robot_truth.x == pytest.approx(1.5) and w2.robot_truth.y == pytest.approx(1.0)
    # closed-form arc for v = 1, w = pi over 1 s from the origin: half a circle of radius 1/pi
    p = unicycle(Pose2(), 1.0, math.pi, 1.0)
    assert p.x == pytest.approx(0.0, abs=1e-12)
    assert p.y == pytest.approx(2 / math.pi)
    assert abs(p.theta) == pytest.approx(math.pi)


def test_step_world_rejects_bad_input():
    with pytest.raises(ValueError):
        step_world(room(), (float("nan"), 0.0), 0.1)
    with pytest.raises(ValueError):
        step_world(room(), (0.0, 0.0), 0.0)


@given(st.floats(-2, 2), st.floats(-3, 3), st.floats(0.001, 1.0))
def test_unicycle_matches_fine_integration(v, w, dt):
    p = Pose2(0.3, -0.2, 0.4)
    q = p
    for _ in range(200):
        q = unicycle(q, v, w, dt / 200)
    exact = unicycle(p, v, w, dt)
    assert exact.distance_to(q) < 1e-9


def test_scan_forward_wall():
    scan = simulate_scan(room())
    assert scan.ranges[FORWARD] == pytest.approx(5.0, abs=1e-12)


def test_scan_leg_range_and_occlusion():
    ped = pedestrian(7.06, 5.0, heading=math.pi / 2, leg_separation=0.0)
    scan, truth = simulate_scan(room(pedestrians=[ped]), return_truth=True)
    assert scan.ranges[FORWARD] == pytest.approx(2.0, abs=1e-12)
    ped = pedestrian(7.0, 5.0, heading=math.pi / 2, leg_separation=0.0)
    scan, truth = simulate_scan(room(pedestrians=[ped]), return_truth=True)
    assert scan.ranges[FORWARD] == pytest.approx(1.94, abs=1e-12)
    assert truth.kind[FORWARD] == HIT_LEG


def test_scan_nearest_hit_everywhere():
    peds = [pedestrian(7.0, 5.3, heading=1.0), pedestrian(3.0, 4.0, heading=-0.3)]
    scan, truth = simulate_scan(room(pedestrians=peds), return_truth=True)
    w = room()
    walls_only = simulate_scan(w)
    ok = scan.valid & walls_only.valid
    assert np.all(scan.ranges[ok] <= walls_only.ranges[ok] + 1e-12)
    assert np.all(truth.kind[scan.ranges < walls_only.ranges - 1e-9] == HIT_LEG)


def _dist_to_segment(p, seg):
    a, b = seg[:2], seg[2:]
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0, 1)
    return np.linalg.norm(p - (a + t * ab))


def test_noise_free_points_on_geometry():
    ped = pedestrian(7.0, 5.3, heading=1.0)
    w = room(Pose2(4.0, 3.0, 0.7), pedestrians=[ped])
    scan, truth = simulate_scan(w, return_truth=True)
    pts, idx = scan_points_array(scan, w.robot_truth, with_index=True)
    legs = ped.leg_positions()
    for p, i in zip(pts, idx):
        if truth.kind[i] == HIT_WALL:
            d = min(_dist_to_segment(p, s) for s in w.walls)
        else:
            d = min(abs(np.linalg.norm(p - c) - ped.leg_radius) for c in legs)
        assert d < 1e-9


def test_far_returns_invalid():
    from mapfollow.simulator import WorldModel
    w = WorldModel(box_walls(-50, -1, 50, 1), (), Pose2(0, 0, 0))
    scan = simulate_scan(w)
    assert not scan.valid[FORWARD]


def test_determinism_same_seed():
    def trace(seed):
        ped = pedestrian(6.0, 5.0, speed=0.0, path=[(8.0, 8.0), (2.0, 8.0)])
        sim = Simulation(room(pedestrians=[ped], seed=seed), 0.01, DriftParams(0.02, 0.01))
        out = []
        for _ in range(50):
            out.append((sim.scan().ranges.copy(), sim.odometry().pose, sim.world.pedestrians[0].center))
            sim.step((0.3, 0.1))
        return out
    a, b = trace(3), trace(3)
    for (ra, pa, ca), (rb, pb, cb) in zip(a, b):
        assert np.array_equal(ra, rb) and pa == pb and ca == cb
    assert not np.array_equal(trace(4)[10][0], a[10][0])


def test_pedestrian_legs_and_speed_bound():
    ped = pedestrian(2.0, 2.0, speed=0.0, path=[(8.0, 2.0)])
    w = room(pedestrians=[ped])
    for _ in range(400):
        w = step_world(w, (0.0, 0.0), 0.025)
        p = w.pedestrians[0]
        assert 0.0 <= p.speed <= 2.0
        legs = p.leg_positions()
        assert np.allclose(legs.mean(axis=0), [p.center.x, p.center.y])
    assert w.pedestrians[0].center.x > 6.0


def test_odometry_exact_without_drift():
    sim = Simulation(room())
    for _ in range(100):
        sim.step((0.5, 0.2))
        assert read_odometry(sim.world, sim.odometer).pose == sim.world.robot_truth


def test_stationary_drift_bounded_by_draws():
    od = Odometer(Pose2(), DriftParams(0.02, 0.01), np.random.default_rng(5))
    r = od.update(0.0, 0.0, 0.025)
    assert math.hypot(r.pose.x, r.pose.y) <= abs(r.twist[0]) * 0.025 + 1e-15
    assert abs(r.pose.theta) <= abs(r.twist[1]) * 0.025 + 1e-15


def test_drift_statistics_match_random_walk():
    # 60 s straight line at 40 Hz: lateral-free along-track error is a sum
    # of 2400 independent N(0, (sigma_v dt)^2) steps
    n_runs, n_steps, dt, sv = 300, 2400, 0.025, 0.02
    rng = np.random.default_rng(11)
    err = np.empty(n_runs)
    for k in range(n_runs):
        od = Odometer(Pose2(), DriftParams(sv, 0.0), rng)
        for _ in range(n_steps):
            od.update(1.0, 0.0, dt)
        err[k] = od.pose.x - n_steps * dt
    expected = sv * dt * math.sqrt(n_steps)
    assert abs(err.mean()) < 4 * expected / math.sqrt(n_runs)
    assert err.std() == pytest.approx(expected, rel=0.15)
