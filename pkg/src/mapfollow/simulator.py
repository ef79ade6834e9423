"""Deterministic 2D world: walls, walking pedestrians, a unicycle robot, a
raycast LiDAR and drifting wheel odometry.

Pedestrians are modelled as two leg circles. The legs sit on either side of
the walking direction (half the leg separation each) and swing fore and aft
with the gait, so a walker seen from behind still shows two separate legs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import Point2, Pose2, Scan, beam_count, normalize_angle

LEADER = "leader"
BYSTANDER = "bystander"

HIT_NONE = 0
HIT_WALL = 1
HIT_LEG = 2

MAX_PEDESTRIAN_SPEED = 2.0


@dataclass(frozen=True)
class LidarConfig:
    angle_min: float = -math.radians(135.0)
    angle_max: float = math.radians(135.0)
    angle_increment: float = math.radians(0.25)
    range_min: float = 0.1
    range_max: float = 30.0
    rate_hz: float = 40.0

    @property
    def n_beams(self) -> int:
        return beam_count(self.angle_min, self.angle_max, self.angle_increment)

    @property
    def bearings(self) -> np.ndarray:
        return self.angle_min + self.angle_increment * np.arange(self.n_beams)


@dataclass(frozen=True)
class PedestrianState:
    center: Point2
    heading: float
    speed: float
    gait_phase: float
    waypoint_path: Tuple[Point2, ...]
    role: str = LEADER
    leg_radius: float = 0.06
    leg_separation: float = 0.25
    gait_amplitude: float = 0.12
    cadence: float = 1.8
    nominal_speed: float = 0.8
    accel: float = 0.5
    turn_rate: float = 2.5
    start_time: float = 0.0
    next_waypoint: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.speed <= MAX_PEDESTRIAN_SPEED:
            raise ValueError(f"pedestrian speed {self.speed} outside [0, {MAX_PEDESTRIAN_SPEED}]")
        if not 0.0 < self.nominal_speed <= MAX_PEDESTRIAN_SPEED:
            raise ValueError("nominal_speed must lie in (0, 2]")
        if self.role not in (LEADER, BYSTANDER):
            raise ValueError(f"unknown pedestrian role {self.role!r}")

    def leg_positions(self) -> np.ndarray:
        """``(2, 2)`` array with the two leg centers."""
        c, s = math.cos(self.heading), math.sin(self.heading)
        swing = self.gait_amplitude * min(1.0, self.speed / self.nominal_speed) * math.sin(self.gait_phase)
        half = 0.5 * self.leg_separation
        # lateral offset along the left normal, swing along the heading
        dx = -s * half + c * swing
        dy = c * half + s * swing
        return np.array([[self.center.x + dx, self.center.y + dy],
                         [self.center.x - dx, self.center.y - dy]])


@dataclass(frozen=True)
class WorldModel:
    walls: np.ndarray                      # (K, 4) segment endpoints x1 y1 x2 y2
    pedestrians: Tuple[PedestrianState, ...]
    robot_truth: Pose2
    rng_seed: int = 0
    time: float = 0.0
    robot_twist: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        walls = np.array(self.walls, dtype=float).reshape(-1, 4)
        lengths = np.hypot(walls[:, 2] - walls[:, 0], walls[:, 3] - walls[:, 1])
        if np.any(lengths <= 0):
            raise ValueError("degenerate wall segment (zero length)")
        walls.flags.writeable = False
        object.__setattr__(self, "walls", walls)
        object.__setattr__(self, "pedestrians", tuple(self.pedestrians))

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        w = self.walls
        return (float(min(w[:, 0].min(), w[:, 2].min())), float(min(w[:, 1].min(), w[:, 3].min())),
                float(max(w[:, 0].max(), w[:, 2].max())), float(max(w[:, 1].max(), w[:, 3].max())))

    def contains(self, x: float, y: float) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax

    def leader(self) -> Optional[PedestrianState]:
        for p in self.pedestrians:
            if p.role == LEADER:
                return p
        return None


def unicycle(pose: Pose2, v: float, w: float, dt: float) -> Pose2:
    """Exact constant-twist integration."""
    th = pose.theta
    if abs(w) < 1e-12:
        return Pose2(pose.x + v * dt * math.cos(th), pose.y + v * dt * math.sin(th), th)
    th2 = th + w * dt
    return Pose2(pose.x + v / w * (math.sin(th2) - math.sin(th)),
                 pose.y - v / w * (math.cos(th2) - math.cos(th)), th2)


def _remaining_path(p: PedestrianState) -> float:
    pts = p.waypoint_path
    if p.next_waypoint >= len(pts):
        return 0.0
    w = pts[p.next_waypoint]
    d = math.hypot(w.x - p.center.x, w.y - p.center.y)
    for a, b in zip(pts[p.next_waypoint:-1], pts[p.next_waypoint + 1:]):
        d += math.hypot(b.x - a.x, b.y - a.y)
    return d


def step_pedestrian(p: PedestrianState, t: float, dt: float, reach: float = 0.25) -> PedestrianState:
    if (t < p.start_time or p.next_waypoint >= len(p.waypoint_path)) and p.speed == 0.0:
        return p
    idx = p.next_waypoint
    pts = p.waypoint_path
    # advance past waypoints already reached; the final one must be reached exactly
    while idx < len(pts) - 1 and math.hypot(pts[idx].x - p.center.x, pts[idx].y - p.center.y) < reach:
        idx += 1
    heading = p.heading
    if t < p.start_time or idx >= len(pts):
        v_des = 0.0
    else:
        remaining = _remaining_path(replace(p, next_waypoint=idx))
        v_des = min(p.nominal_speed, math.sqrt(2.0 * p.accel * remaining))
        if remaining < 1e-3:
            v_des = 0.0
            idx = len(pts)
        else:
            w = pts[idx]
            bearing = math.atan2(w.y - p.center.y, w.x - p.center.x)
            err = normalize_angle(bearing - heading)
            max_turn = p.turn_rate * dt
            heading = normalize_angle(heading + max(-max_turn, min(max_turn, err)))
    dv = max(-p.accel * dt, min(p.accel * dt, v_des - p.speed))
    speed = max(0.0, p.speed + dv)
    if idx < len(pts) and speed > 0.0:
        # never overshoot the final waypoint
        step = speed * dt
        if idx == len(pts) - 1:
            w = pts[idx]
            step = min(step, math.hypot(w.x - p.center.x, w.y - p.center.y))
        center = Point2(p.center.x + step * math.cos(heading), p.center.y + step * math.sin(heading))
    else:
        center = p.center
    phase = p.gait_phase
    if speed > 0.0:
        phase = math.fmod(phase + 2.0 * math.pi * p.cadence * dt, 2.0 * math.pi)
    return replace(p, center=center, heading=heading, speed=speed, gait_phase=phase, next_waypoint=idx)


def step_world(world: WorldModel, cmd: Tuple[float, float], dt: float) -> WorldModel:
    v, w = float(cmd[0]), float(cmd[1])
    if not (math.isfinite(v) and math.isfinite(w)):
        raise ValueError(f"non-finite command {cmd}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    robot = unicycle(world.robot_truth, v, w, dt)
    peds = tuple(step_pedestrian(p, world.time, dt) for p in world.pedestrians)
    return replace(world, robot_truth=robot, pedestrians=peds, time=world.time + dt, robot_twist=(v, w))


def _ray_hits(origin: np.ndarray, angles: np.ndarray, walls: np.ndarray, legs: np.ndarray, leg_radius: np.ndarray):
    """Nearest-hit distance and hit kind per ray."""
    n = angles.shape[0]
    dx = np.cos(angles)
    dy = np.sin(angles)
    best = np.full(n, np.inf)
    kind = np.zeros(n, dtype=np.int8)
    owner = np.full(n, -1, dtype=np.int64)
    if walls.shape[0]:
        px = walls[:, 0] - origin[0]
        py = walls[:, 1] - origin[1]
        ex = walls[:, 2] - walls[:, 0]
        ey = walls[:, 3] - walls[:, 1]
        denom = dx[:, None] * ey[None, :] - dy[:, None] * ex[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (px[None, :] * ey[None, :] - py[None, :] * ex[None, :]) / denom
            u = (px[None, :] * dy[:, None] - py[None, :] * dx[:, None]) / denom
        ok = (np.abs(denom) > 1e-12) & (t > 0) & (u >= 0) & (u <= 1)
        t = np.where(ok, t, np.inf)
        j = np.argmin(t, axis=1)
        tw = t[np.arange(n), j]
        hit = tw < best
        best = np.where(hit, tw, best)
        kind[hit] = HIT_WALL
        owner[hit] = j[hit]
    if legs.shape[0]:
        cx = legs[:, 0] - origin[0]
        cy = legs[:, 1] - origin[1]
        proj = dx[:, None] * cx[None, :] + dy[:, None] * cy[None, :]
        perp2 = (cx * cx + cy * cy)[None, :] - proj * proj
        disc = leg_radius[None, :] ** 2 - perp2
        with np.errstate(invalid="ignore"):
            t = proj - np.sqrt(disc)
        ok = (disc >= 0) & (t > 0)
        t = np.where(ok, t, np.inf)
        j = np.argmin(t, axis=1)
        tl = t[np.arange(n), j]
        hit = tl < best
        best = np.where(hit, tl, best)
        kind[hit] = HIT_LEG
        owner[hit] = j[hit]
    return best, kind, owner


@dataclass
class ScanTruth:
    """Per-beam ground truth of a simulated scan."""

    kind: np.ndarray      # HIT_NONE / HIT_WALL / HIT_LEG
    owner: np.ndarray     # wall index or leg index (2*pedestrian + leg)
    true_range: np.ndarray


def simulate_scan(world: WorldModel, noise_sigma: float = 0.0, rng: Optional[np.random.Generator] = None,
                  lidar: LidarConfig = LidarConfig(), return_truth: bool = False):
    """Raycast one sweep from the robot's true pose.

    A Gaussian range error with standard deviation ``noise_sigma`` is drawn
    for every beam (valid or not) so the random stream does not depend on
    the scene. Returns past ``range_max`` are flagged invalid.
    """
    pose = world.robot_truth
    if not world.contains(pose.x, pose.y):
        raise ValueError("robot outside world bounds")
    angles = lidar.bearings + pose.theta
    if world.pedestrians:
        legs = np.concatenate([p.leg_positions() for p in world.pedestrians])
        radii = np.repeat([p.leg_radius for p in world.pedestrians], 2)
    else:
        legs = np.zeros((0, 2))
        radii = np.zeros(0)
    true_r, kind, owner = _ray_hits(np.array([pose.x, pose.y]), angles, world.walls, legs, radii)
    ranges = true_r.copy()
    if noise_sigma > 0:
        if rng is None:
            raise ValueError("noisy scan needs an rng")
        ranges = ranges + noise_sigma * rng.standard_normal(ranges.shape[0])
    with np.errstate(invalid="ignore"):
        valid = np.isfinite(ranges) & (ranges >= lidar.range_min) & (ranges <= lidar.range_max)
    kind = np.where(valid, kind, HIT_NONE).astype(np.int8)
    scan = Scan(world.time, lidar.angle_min, lidar.angle_max, lidar.angle_increment,
                np.where(valid, ranges, 0.0), valid, lidar.range_min, lidar.range_max)
    if return_truth:
        return scan, ScanTruth(kind, np.where(valid, owner, -1), true_r)
    return scan


@dataclass(frozen=True)
class DriftParams:
    sigma_v: float = 0.0   # per-step std of linear velocity error [m/s]
    sigma_w: float = 0.0   # per-step std of angular velocity error [rad/s]

    @property
    def exact(self) -> bool:
        return self.sigma_v == 0.0 and self.sigma_w == 0.0


@dataclass(frozen=True)
class OdometryReading:
    pose: Pose2
    twist: Tuple[float, float]


class Odometer:
    """Integrates the executed twist corrupted by per-step Gaussian noise."""

    def __init__(self, start: Pose2, drift: DriftParams = DriftParams(), rng: Optional[np.random.Generator] = None):
        self.pose = start
        self.twist = (0.0, 0.0)
        self.drift = drift
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def update(self, v: float, w: float, dt: float) -> OdometryReading:
        if not self.drift.exact:
            nv, nw = self.rng.standard_normal(2)
            v = v + self.drift.sigma_v * nv
            w = w + self.drift.sigma_w * nw
        self.pose = unicycle(self.pose, v, w, dt)
        self.twist = (v, w)
        return self.reading()

    def reading(self) -> OdometryReading:
        return OdometryReading(self.pose, self.twist)


def read_odometry(world: WorldModel, odometer: Odometer) -> OdometryReading:
    """Current odometry for ``world``.

    The odometer must have been stepped alongside ``world``; with zero drift
    it integrates the same twists with the same formula and therefore equals
    the ground truth bit for bit.
    """
    if odometer.drift.exact and odometer.pose != world.robot_truth:
        raise ValueError("odometer out of sync with world")
    return odometer.reading()


class Simulation:
    """Owns the world, its random streams and the odometer."""

    def __init__(self, world: WorldModel, noise_sigma: float = 0.0, drift: DriftParams = DriftParams(),
                 lidar: LidarConfig = LidarConfig()):
        self.world = world
        self.noise_sigma = float(noise_sigma)
        self.lidar = lidar
        scan_ss, odom_ss = np.random.SeedSequence(world.rng_seed).spawn(2)
        self.scan_rng = np.random.default_rng(scan_ss)
        self.odometer = Odometer(world.robot_truth, drift, np.random.default_rng(odom_ss))

    @property
    def dt(self) -> float:
        return 1.0 / self.lidar.rate_hz

    def scan(self, return_truth: bool = False):
        return simulate_scan(self.world, self.noise_sigma, self.scan_rng, self.lidar, return_truth)

    def odometry(self) -> OdometryReading:
        return self.odometer.reading()

    def step(self, cmd: Tuple[float, float]) -> WorldModel:
        self.world = step_world(self.world, cmd, self.dt)
        self.odometer.update(cmd[0], cmd[1], self.dt)
        return self.world
