"""Odometry-seeded correlative scan matching on a log-odds occupancy grid.

This is a deliberately small stand-in for a full 2D SLAM system: every scan
is matched against the map built so far and then integrated at the matched
pose. There is no loop closure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import _kernels
from .core import L_MAX, L_MIN, OccupancyGridMap, Pose2, Scan, scan_points_array
from .simulator import OdometryReading

LOG_ODDS_HIT = 0.85
LOG_ODDS_MISS = -0.4


@dataclass(frozen=True)
class MatcherConfig:
    linear_window: float = 0.30
    linear_step: float = 0.02       # must equal the map resolution
    angular_window: float = 0.10
    angular_step: float = 0.005
    beam_stride: int = 2            # use every n-th valid beam while matching
    # quadratic prior pulling the match towards the odometry seed, per
    # matched point: cost = w_t * d^2 [m^2] + w_r * dtheta^2 [rad^2]
    translation_weight: float = 0.1
    rotation_weight: float = 0.5
    # endpoint likelihood field: neighbourhood radius [cells] and Gaussian
    # width [m]; radius 0 scores each endpoint by its own cell only
    field_radius: int = 2
    field_sigma: float = 0.04

    @property
    def n_lin(self) -> int:
        return int(round(self.linear_window / self.linear_step))

    @property
    def n_ang(self) -> int:
        return int(round(self.angular_window / self.angular_step))


@dataclass(frozen=True)
class SlamConfig:
    resolution: float = 0.02
    initial_size: float = 10.0
    # a scan is matched and integrated only once odometry has moved this far
    # since the last integrated scan (0 integrates every scan)
    update_distance: float = 0.25
    update_angle: float = 0.1
    matcher: MatcherConfig = field(default_factory=MatcherConfig)

    def __post_init__(self) -> None:
        if abs(self.matcher.linear_step - self.resolution) > 1e-12:
            raise ValueError("matcher linear_step must equal the map resolution")


@dataclass
class SlamState:
    """``pose`` is the current map-frame estimate (updated every step);
    ``trajectory`` holds the poses of integrated scans only."""

    map: OccupancyGridMap
    pose: Pose2 = field(default_factory=Pose2)
    trajectory: List[Pose2] = field(default_factory=list)
    last_odom: Optional[Pose2] = None
    scores: List[float] = field(default_factory=list)
    config: SlamConfig = field(default_factory=SlamConfig)
    anchor_odom: Optional[Pose2] = None

    @classmethod
    def empty(cls, config: SlamConfig = SlamConfig()) -> "SlamState":
        # half-cell offset keeps walls at round coordinates off cell boundaries
        half = 0.5 * config.resolution
        return cls(OccupancyGridMap.centered(config.resolution, config.initial_size, config.initial_size,
                                             (half, half)), config=config)

    @property
    def matcher(self) -> MatcherConfig:
        return self.config.matcher


def _rotation_order(n_ang: int) -> np.ndarray:
    ks = sorted(range(2 * n_ang + 1), key=lambda k: (abs(k - n_ang), k))
    return np.array(ks, dtype=np.int64)


def _matching_points(scan: Scan, stride: int) -> np.ndarray:
    return scan_points_array(scan)[::stride]


def _rotated_cells(grid: OccupancyGridMap, pts: np.ndarray, seed: Pose2, cfg: MatcherConfig):
    """Map cell indices of ``pts`` under every candidate rotation at the seed translation."""
    n_ang = cfg.n_ang
    th = seed.theta + cfg.angular_step * (np.arange(2 * n_ang + 1) - n_ang)
    c = np.cos(th)[:, None]
    s = np.sin(th)[:, None]
    x = seed.x + c * pts[None, :, 0] - s * pts[None, :, 1]
    y = seed.y + s * pts[None, :, 0] + c * pts[None, :, 1]
    res = grid.resolution
    ix = np.floor((x - grid.origin.x) / res).astype(np.int64)
    iy = np.floor((y - grid.origin.y) / res).astype(np.int64)
    return ix, iy


def _search_tables(grid: OccupancyGridMap, pts: np.ndarray, seed: Pose2, cfg: MatcherConfig, levels: int):
    """Likelihood pyramid over the part of the map the search can reach, and
    the matching padded, window-shifted point indices.

    Points whose whole search window lies outside the map are parked at
    index 0, which sits in the constant 0.5 padding at every level.
    """
    n_lin = cfg.n_lin
    reach = 2 * n_lin + (1 << _kernels.MAX_LEVEL) - 1
    pad = reach + 1
    ix, iy = _rotated_cells(grid, pts, seed, cfg)
    r = cfg.field_radius
    x0 = max(0, int(ix.min()) - n_lin - r)
    y0 = max(0, int(iy.min()) - n_lin - r)
    x1 = min(grid.width, int(ix.max()) + n_lin + (1 << _kernels.MAX_LEVEL) + r)
    y1 = min(grid.height, int(iy.max()) + n_lin + (1 << _kernels.MAX_LEVEL) + r)
    sub = grid.cells[y0:max(y0, y1), x0:max(x0, x1)]
    pyr = _kernels.likelihood_pyramid(np.ascontiguousarray(sub), pad, levels, cfg.field_radius,
                                      cfg.field_sigma / cfg.linear_step)
    cx = ix - x0 + (pad - n_lin)
    cy = iy - y0 + (pad - n_lin)
    far = (cx < 0) | (cy < 0) | (cx + reach >= pyr.shape[2]) | (cy + reach >= pyr.shape[1])
    cx[far] = 0
    cy[far] = 0
    return pyr, np.ascontiguousarray(cx), np.ascontiguousarray(cy)


def scan_match(grid: OccupancyGridMap, scan: Scan, seed: Pose2,
               cfg: MatcherConfig = MatcherConfig()) -> Tuple[Pose2, float]:
    """Best pose in the search window around ``seed`` and its mean endpoint
    likelihood.

    The search is exhaustive in effect (branch and bound with exact bounds):
    it returns the candidate maximizing the summed logistic likelihood of the
    projected endpoints minus a quadratic prior on the displacement from the
    seed, ties going to the smallest translation, then the smallest rotation.
    The returned score is the plain mean likelihood at the chosen pose.
    """
    pts = _matching_points(scan, cfg.beam_stride)
    if pts.shape[0] == 0:
        return seed, 0.0
    if not np.any(grid.cells > 0.0):
        return seed, 0.5
    pyr, cx, cy = _search_tables(grid, pts, seed, cfg, _kernels.MAX_LEVEL)
    order = _rotation_order(cfg.n_ang)
    lin_pen, rot_pen = _penalties(cfg, pts.shape[0], order)
    k, dx, dy, _ = _kernels.branch_and_bound(pyr, cx, cy, cfg.n_lin, order, lin_pen, rot_pen)
    pose = Pose2(seed.x + dx * cfg.linear_step, seed.y + dy * cfg.linear_step,
                 seed.theta + (k - cfg.n_ang) * cfg.angular_step)
    total = _kernels._node_value(pyr, 0, cx[k], cy[k], dx + cfg.n_lin, dy + cfg.n_lin)
    return pose, float(total) / pts.shape[0]


def _penalties(cfg: MatcherConfig, n_pts: int, order: np.ndarray):
    lin_pen = n_pts * cfg.translation_weight * cfg.linear_step ** 2
    dth = (order - cfg.n_ang) * cfg.angular_step
    rot_pen = n_pts * cfg.rotation_weight * dth * dth
    return float(lin_pen), np.ascontiguousarray(rot_pen, dtype=float)


def score_all_candidates(grid: OccupancyGridMap, scan: Scan, seed: Pose2,
                         cfg: MatcherConfig = MatcherConfig()) -> np.ndarray:
    """Brute-force likelihood-sum table ``[rotation, dy, dx]`` using the
    matcher's arithmetic (same lookups, same summation order), before the
    seed prior is subtracted."""
    pts = _matching_points(scan, cfg.beam_stride)
    pyr, cx, cy = _search_tables(grid, pts, seed, cfg, 0)
    span = 2 * cfg.n_lin + 1
    out = np.empty((cx.shape[0], span, span))
    for k in range(cx.shape[0]):
        for oy in range(span):
            for ox in range(span):
                s = 0.0
                for v in pyr[0, cy[k] + oy, cx[k] + ox]:
                    s += v
                out[k, oy, ox] = s
    return out


def integrate_scan(state: SlamState, scan: Scan, pose: Pose2) -> SlamState:
    """Ray-trace every valid beam from ``pose`` into the map and append the pose."""
    if not all(math.isfinite(v) for v in pose.as_tuple()):
        raise ValueError("non-finite pose")
    grid = state.map
    pts = scan_points_array(scan, pose)
    if pts.shape[0]:
        grid.grow_to_include(min(pts[:, 0].min(), pose.x), min(pts[:, 1].min(), pose.y),
                             max(pts[:, 0].max(), pose.x), max(pts[:, 1].max(), pose.y))
        start = grid.world_to_cell(np.array([[pose.x, pose.y]]))[0]
        ends = grid.world_to_cell(pts)
        _kernels.trace_rays(grid.cells, grid.observed, int(start[0]), int(start[1]), ends,
                            np.ones(ends.shape[0], dtype=np.bool_), LOG_ODDS_MISS, LOG_ODDS_HIT, L_MIN, L_MAX)
    state.pose = pose
    state.trajectory.append(pose)
    return state


def slam_step(state: SlamState, scan: Scan, odom: OdometryReading) -> SlamState:
    """Seed with the odometry increment, match, integrate.

    The first scan is integrated at the origin without matching. Afterwards
    the pose follows odometry until the robot has moved ``update_distance``
    or turned ``update_angle`` since the last integrated scan.
    """
    cfg = state.config
    if state.last_odom is None:
        state.last_odom = odom.pose
        state.anchor_odom = odom.pose
        state.scores.append(1.0)
        return integrate_scan(state, scan, Pose2())
    seed = state.pose.compose(odom.pose.relative_to(state.last_odom))
    state.last_odom = odom.pose
    moved = odom.pose.relative_to(state.anchor_odom)
    if math.hypot(moved.x, moved.y) < cfg.update_distance and abs(moved.theta) < cfg.update_angle:
        state.pose = seed
        return state
    pose, score = scan_match(state.map, scan, seed, cfg.matcher)
    state.anchor_odom = odom.pose
    state.scores.append(score)
    return integrate_scan(state, scan, pose)
