import math
from dataclasses import replace

import numpy as np
import pytest

from mapfollow.core import L_MAX, Pose2, Scan
from mapfollow.simulator import OdometryReading, Simulation, simulate_scan
from mapfollow.slam import (LOG_ODDS_HIT, LOG_ODDS_MISS, MatcherConfig, SlamConfig, SlamState, _penalties,
                            _rotation_order, integrate_scan, scan_match, score_all_candidates, slam_step)

from helpers import FORWARD, box_walls, room
from mapfollow.simulator import WorldModel


def _one_beam(r):
    return Scan.from_ranges(0.0, [r], angle_min=0.0, angle_max=0.0, angle_increment=0.01)


def _cell(state, x, y):
    ix, iy = state.map.world_to_cell(np.array([[x, y]]))[0]
    return state.map.cells[iy, ix]


def test_single_beam_update():
    s = integrate_scan(SlamState.empty(), _one_beam(1.0), Pose2())
    assert _cell(s, 1.0, 0.0) == pytest.approx(LOG_ODDS_HIT)
    for x in np.arange(0.0, 0.98, 0.02):
        assert _cell(s, x, 0.0) == pytest.approx(LOG_ODDS_MISS)
    assert len(s.trajectory) == 1


def test_repeated_beam_saturates():
    s = SlamState.empty()
    for _ in range(20):
        integrate_scan(s, _one_beam(1.0), Pose2())
    assert _cell(s, 1.0, 0.0) == L_MAX
    assert _cell(s, 0.5, 0.0) == -5.0


def test_passing_person_overwritten_by_wall():
    s = SlamState.empty()
    for _ in range(3):
        integrate_scan(s, _one_beam(1.0), Pose2())
    for _ in range(30):
        integrate_scan(s, _one_beam(3.0), Pose2())
    assert _cell(s, 1.0, 0.0) < 0 and _cell(s, 3.0, 0.0) > 0


def test_integration_footprint_and_convergence():
    w = WorldModel(box_walls(-3, -2, 4, 2.5), (), Pose2(0.3, 0.1, 0.2))
    scan = simulate_scan(w)
    s = SlamState.empty()
    before = s.map.cells.copy()
    integrate_scan(s, scan, Pose2(0.3, 0.1, 0.2))
    grid = s.map
    changed = np.argwhere(grid.cells != 0.0)
    centers = grid.cell_centers(changed[:, 1], changed[:, 0])
    d = np.hypot(centers[:, 0] - 0.3, centers[:, 1] - 0.1)
    assert d.max() <= scan.range_max + grid.resolution * 1.5
    assert before.shape == grid.cells.shape
    for _ in range(20):
        integrate_scan(s, scan, Pose2(0.3, 0.1, 0.2))
    prev = s.map.cells.copy()
    integrate_scan(s, scan, Pose2(0.3, 0.1, 0.2))
    assert np.array_equal(prev, s.map.cells)


def _mapped_room(pose=Pose2(4.0, 3.0, 0.3)):
    walls = np.vstack([box_walls(0, 0, 10, 7), box_walls(6, 4, 7, 5), [[2, 5, 3, 6]]])
    w = WorldModel(walls, (), pose)
    scan = simulate_scan(w)
    s = SlamState.empty()
    for _ in range(3):
        integrate_scan(s, scan, Pose2())
    return s, scan


def test_match_self_consistent():
    s, scan = _mapped_room()
    pose, score = scan_match(s.map, scan, Pose2())
    assert pose == Pose2() and 0.9 < score <= 1.0


def test_match_recovers_perturbation():
    s, scan = _mapped_room()
    pose, _ = scan_match(s.map, scan, Pose2(0.1, 0.0, 0.04))
    assert math.hypot(pose.x, pose.y) <= 0.02 + 1e-9 and abs(pose.theta) <= 0.005 + 1e-9
    pose, _ = scan_match(s.map, scan, Pose2(-0.06, 0.08, -0.03))
    assert math.hypot(pose.x, pose.y) <= 0.02 + 1e-9 and abs(pose.theta) <= 0.005 + 1e-9


def test_match_featureless_and_empty():
    s = SlamState.empty()
    s.map.cells[0, 0] = 3.0                 # a lone occupied cell far from any endpoint
    _, scan = _mapped_room()
    pose, score = scan_match(s.map, scan, Pose2(0.5, 0.5, 0.0))
    assert pose == Pose2(0.5, 0.5, 0.0) and score <= 0.5 + 1e-12
    empty = Scan.from_ranges(0.0, [np.nan] * 1081)
    assert scan_match(s.map, empty, Pose2(1, 2, 0)) == (Pose2(1, 2, 0), 0.0)
    assert scan_match(SlamState.empty().map, scan, Pose2(1, 2, 0))[0] == Pose2(1, 2, 0)


@pytest.mark.parametrize("seed,weights", [(Pose2(0.04, -0.02, 0.01), (0.1, 0.5)),
                                          (Pose2(0.0, 0.06, -0.02), (0.0, 0.0)),
                                          (Pose2(-0.05, 0.0, 0.0), (2.0, 1.0))])
def test_match_is_window_optimum(seed, weights):
    s, scan = _mapped_room()
    cfg = MatcherConfig(linear_window=0.08, angular_window=0.02, translation_weight=weights[0],
                        rotation_weight=weights[1])
    table = score_all_candidates(s.map, scan, seed, cfg)
    n_pts = (int(scan.valid.sum()) + 1) // 2          # every 2nd valid beam
    lin, _ = _penalties(cfg, n_pts, _rotation_order(cfg.n_ang))
    n_ang, n_lin = cfg.n_ang, cfg.n_lin
    k = np.arange(2 * n_ang + 1)[:, None, None]
    o = np.arange(-n_lin, n_lin + 1)
    d2 = (o[None, :, None] ** 2 + o[None, None, :] ** 2)
    rot = n_pts * cfg.rotation_weight * ((k - n_ang) * cfg.angular_step) ** 2
    objective = table - lin * d2 - rot
    pose, score = scan_match(s.map, scan, seed, cfg)
    kk = int(round((pose.theta - seed.theta) / cfg.angular_step)) + n_ang
    iy = int(round((pose.y - seed.y) / cfg.linear_step)) + n_lin
    ix = int(round((pose.x - seed.x) / cfg.linear_step)) + n_lin
    assert objective[kk, iy, ix] >= objective.max() - 1e-9
    assert score == pytest.approx(table[kk, iy, ix] / n_pts, abs=1e-12)
    assert 0.0 <= score <= 1.0


def test_plain_logistic_field_option():
    s, scan = _mapped_room()
    cfg = MatcherConfig(field_radius=0)
    pose, score = scan_match(s.map, scan, Pose2(0.04, 0.0, 0.0), cfg)
    assert math.hypot(pose.x, pose.y) <= 0.02 + 1e-9


def test_slam_step_first_scan_and_noise_free_run():
    sim = Simulation(WorldModel(np.vstack([box_walls(0, 0, 12, 6), box_walls(5, 2, 6, 3)]), (), Pose2(1, 1, 0)))
    s = SlamState.empty()
    slam_step(s, sim.scan(), sim.odometry())
    assert s.pose == Pose2() and len(s.trajectory) == 1 and s.map.occupied_mask().any()
    start = sim.world.robot_truth
    for k in range(400):
        sim.step((0.5, 0.3 * math.sin(k / 40)))
        slam_step(s, sim.scan(), sim.odometry())
        truth = sim.world.robot_truth.relative_to(start)
        assert s.pose.distance_to(truth) <= 0.04 + 1e-9
    assert len(s.trajectory) == len(s.scores) > 5


def test_config_validation():
    with pytest.raises(ValueError):
        SlamConfig(resolution=0.05)
    with pytest.raises(ValueError):
        integrate_scan(SlamState.empty(), _one_beam(1.0), Pose2(float("nan"), 0, 0))
