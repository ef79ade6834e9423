"""Shared geometry, scan and grid types.

Conventions used everywhere in the package:

* angles are radians, normalized to (-pi, pi]
* a pose ``(x, y, theta)`` maps a point from its own frame into the parent
  frame by rotating by ``theta`` and then translating by ``(x, y)``
* invalid LiDAR returns are carried in an explicit boolean mask, never as
  sentinel range values
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple

import numpy as np

TWO_PI = 2.0 * math.pi

# log-odds clamp shared by the SLAM map and the tracker's local grid
L_MIN = -5.0
L_MAX = 5.0


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.remainder(float(theta), TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    return a


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def distance_to(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Pose2:
    """Planar rigid transform; ``theta`` is normalized on construction."""

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def inverse(self) -> "Pose2":
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.theta)

    def compose(self, other: "Pose2") -> "Pose2":
        """``self * other``: express ``other`` (given in self's frame) in the parent frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )

    def relative_to(self, base: "Pose2") -> "Pose2":
        """Pose of ``self`` expressed in ``base``'s frame."""
        return base.inverse().compose(self)

    def distance_to(self, other: "Pose2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.x, self.y, self.theta)


def transform_point(p: Point2, frame: Pose2) -> Point2:
    c, s = math.cos(frame.theta), math.sin(frame.theta)
    return Point2(frame.x + c * p.x - s * p.y, frame.y + s * p.x + c * p.y)


def transform_points(pts: np.ndarray, frame: Pose2) -> np.ndarray:
    """Vectorized :func:`transform_point` for an ``(N, 2)`` array."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    c, s = math.cos(frame.theta), math.sin(frame.theta)
    out = np.empty_like(pts)
    out[:, 0] = frame.x + c * pts[:, 0] - s * pts[:, 1]
    out[:, 1] = frame.y + s * pts[:, 0] + c * pts[:, 1]
    return out


def beam_count(angle_min: float, angle_max: float, angle_increment: float) -> int:
    # the epsilon absorbs representation error, e.g. 270 deg / 0.25 deg
    return int(math.floor((angle_max - angle_min) / angle_increment + 1e-9)) + 1


@dataclass(frozen=True)
class Scan:
    """One LiDAR sweep in the sensor frame.

    ``valid[i]`` is False for beams with no usable return (out of range,
    dropped by a filter, ...). The range stored for an invalid beam is
    meaningless and must not be read.
    """

    timestamp: float
    angle_min: float
    angle_max: float
    angle_increment: float
    ranges: np.ndarray
    valid: np.ndarray
    range_min: float = 0.1
    range_max: float = 30.0

    def __post_init__(self) -> None:
        ranges = np.array(self.ranges, dtype=float)
        valid = np.array(self.valid, dtype=bool)
        n = beam_count(self.angle_min, self.angle_max, self.angle_increment)
        if ranges.shape != (n,) or valid.shape != (n,):
            raise ValueError(f"scan expects {n} beams, got ranges {ranges.shape} valid {valid.shape}")
        r = ranges[valid]
        if r.size and (not np.all(np.isfinite(r)) or r.min() < self.range_min or r.max() > self.range_max):
            raise ValueError("valid range outside [range_min, range_max]")
        ranges.flags.writeable = False
        valid.flags.writeable = False
        object.__setattr__(self, "ranges", ranges)
        object.__setattr__(self, "valid", valid)

    @classmethod
    def from_ranges(cls, timestamp: float, ranges: Sequence[float], angle_min: float = -math.radians(135.0),
                    angle_max: float = math.radians(135.0), angle_increment: float = math.radians(0.25),
                    range_min: float = 0.1, range_max: float = 30.0) -> "Scan":
        """Build a scan, flagging non-finite and out-of-band ranges invalid."""
        r = np.asarray(ranges, dtype=float)
        with np.errstate(invalid="ignore"):
            valid = np.isfinite(r) & (r >= range_min) & (r <= range_max)
        r = np.where(valid, r, 0.0)
        return cls(timestamp, angle_min, angle_max, angle_increment, r, valid, range_min, range_max)

    @property
    def n_beams(self) -> int:
        return int(self.ranges.shape[0])

    @property
    def bearings(self) -> np.ndarray:
        return self.angle_min + self.angle_increment * np.arange(self.n_beams)

    def with_valid(self, valid: np.ndarray) -> "Scan":
        return Scan(self.timestamp, self.angle_min, self.angle_max, self.angle_increment,
                    self.ranges, valid, self.range_min, self.range_max)


def scan_points_array(scan: Scan, sensor_pose: Pose2 = Pose2(), with_index: bool = False):
    """Valid scan endpoints as an ``(N, 2)`` array in ``sensor_pose``'s parent frame."""
    idx = np.flatnonzero(scan.valid)
    r = scan.ranges[idx]
    a = scan.angle_min + scan.angle_increment * idx + sensor_pose.theta
    pts = np.empty((idx.size, 2))
    pts[:, 0] = sensor_pose.x + r * np.cos(a)
    pts[:, 1] = sensor_pose.y + r * np.sin(a)
    if with_index:
        return pts, idx
    return pts


def scan_to_points(scan: Scan, sensor_pose: Pose2 = Pose2()) -> List[Point2]:
    return [Point2(float(x), float(y)) for x, y in scan_points_array(scan, sensor_pose)]


@dataclass(frozen=True)
class TrackerConfig:
    """People-tracking thresholds; defaults are the published values."""

    alpha: float = 0.13     # cluster break distance [m]
    beta: int = 3           # minimum points per cluster
    gamma: float = 0.3      # detection confidence prune
    delta: float = 0.5      # travel needed before a leg pair becomes a person [m]
    epsilon: float = 0.9    # deletion bound on P[0][0] [m^2]
    zeta: float = 0.35      # people filter radius [m]
    c_min: float = 0.1      # confidence floor
    q: float = 0.05         # process noise factor
    r: float = 0.1          # observation noise factor
    gate: float = 0.75      # association gate [m]
    pair_distance: float = 0.8  # max leg separation for pairing [m]
    p0: float = 0.05        # initial covariance diagonal

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "gamma", "delta", "epsilon", "zeta", "c_min", "q", "r", "gate",
                     "pair_distance", "p0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"TrackerConfig.{name} must be positive")
        if not (0.0 <= self.gamma <= 1.0 and 0.0 <= self.c_min <= 1.0):
            raise ValueError("gamma and c_min must lie in [0, 1]")


class OccupancyGridMap:
    """Log-odds occupancy grid.

    ``cells[iy, ix]`` covers world ``[ox + ix*res, ox + (ix+1)*res)`` by
    ``[oy + iy*res, oy + (iy+1)*res)`` where ``(ox, oy)`` is the origin. Only
    axis-aligned origins (``theta == 0``) are supported.
    """

    def __init__(self, resolution: float, width: int, height: int, origin: Pose2 = Pose2(),
                 cells: np.ndarray | None = None, observed: np.ndarray | None = None) -> None:
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        if origin.theta != 0.0:
            raise ValueError("rotated grid origins are not supported")
        self.resolution = float(resolution)
        self.origin = origin
        if cells is None:
            cells = np.zeros((int(height), int(width)))
        self.cells = np.ascontiguousarray(cells, dtype=float)
        if self.cells.shape != (int(height), int(width)):
            raise ValueError("cells shape does not match width/height")
        if observed is None:
            observed = self.cells != 0.0
        self.observed = np.ascontiguousarray(observed, dtype=bool)

    @classmethod
    def centered(cls, resolution: float, size_x: float, size_y: float, center: Tuple[float, float] = (0.0, 0.0)):
        w = int(math.ceil(size_x / resolution))
        h = int(math.ceil(size_y / resolution))
        origin = Pose2(center[0] - 0.5 * w * resolution, center[1] - 0.5 * h * resolution, 0.0)
        return cls(resolution, w, h, origin)

    @property
    def width(self) -> int:
        return int(self.cells.shape[1])

    @property
    def height(self) -> int:
        return int(self.cells.shape[0])

    def copy(self) -> "OccupancyGridMap":
        return OccupancyGridMap(self.resolution, self.width, self.height, self.origin,
                                self.cells.copy(), self.observed.copy())

    def world_to_cell(self, pts: np.ndarray) -> np.ndarray:
        """Integer ``(ix, iy)`` per row of ``pts``; may lie outside the grid."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        ix = np.floor((pts[:, 0] - self.origin.x) / self.resolution).astype(np.int64)
        iy = np.floor((pts[:, 1] - self.origin.y) / self.resolution).astype(np.int64)
        return np.stack([ix, iy], axis=1)

    def cell_centers(self, ix: np.ndarray, iy: np.ndarray) -> np.ndarray:
        x = self.origin.x + (np.asarray(ix) + 0.5) * self.resolution
        y = self.origin.y + (np.asarray(iy) + 0.5) * self.resolution
        return np.stack([x, y], axis=-1)

    def in_bounds(self, ix, iy) -> np.ndarray:
        ix = np.asarray(ix)
        iy = np.asarray(iy)
        return (ix >= 0) & (ix < self.width) & (iy >= 0) & (iy < self.height)

    def occupied_mask(self, threshold: float = 0.0) -> np.ndarray:
        return self.cells > threshold

    def free_mask(self, threshold: float = 0.0) -> np.ndarray:
        return self.cells < -threshold

    def unknown_mask(self) -> np.ndarray:
        return ~self.observed

    def grow_to_include(self, xmin: float, ymin: float, xmax: float, ymax: float, margin: float = 2.0) -> bool:
        """Enlarge the grid (in whole cells) so the box fits; returns True if it grew."""
        res = self.resolution
        lo_x = math.floor((xmin - self.origin.x) / res)
        lo_y = math.floor((ymin - self.origin.y) / res)
        hi_x = math.floor((xmax - self.origin.x) / res)
        hi_y = math.floor((ymax - self.origin.y) / res)
        if lo_x >= 0 and lo_y >= 0 and hi_x < self.width and hi_y < self.height:
            return False
        m = int(math.ceil(margin / res))
        pad_l = m - lo_x if lo_x < 0 else 0
        pad_b = m - lo_y if lo_y < 0 else 0
        pad_r = hi_x - self.width + 1 + m if hi_x >= self.width else 0
        pad_t = hi_y - self.height + 1 + m if hi_y >= self.height else 0
        self.cells = np.ascontiguousarray(np.pad(self.cells, ((pad_b, pad_t), (pad_l, pad_r))))
        self.observed = np.ascontiguousarray(np.pad(self.observed, ((pad_b, pad_t), (pad_l, pad_r))))
        self.origin = Pose2(self.origin.x - pad_l * res, self.origin.y - pad_b * res, 0.0)
        return True


def bounding_box(pts: Iterable[Sequence[float]]) -> Tuple[float, float, float, float]:
    a = np.asarray(list(pts) if not isinstance(pts, np.ndarray) else pts, dtype=float).reshape(-1, 2)
    return float(a[:, 0].min()), float(a[:, 1].min()), float(a[:, 0].max()), float(a[:, 1].max())
