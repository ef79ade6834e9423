"""Robot-centred occupancy grid used to veto person initiation on static objects."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .. import _kernels
from ..core import L_MAX, L_MIN, OccupancyGridMap, Point2, Pose2

GRID_HIT = 0.4
GRID_MISS = -0.2
GRID_OCCUPIED = 1.0


class LocalGrid:
    """Axis-aligned grid in the odometry frame that follows the robot.

    The grid is shifted by whole cells so the robot stays in the centre
    cell; contents move with the world, cells scrolling in are unknown.
    Unknown cells count as free.
    """

    def __init__(self, size: float = 20.0, resolution: float = 0.1) -> None:
        self.n = int(round(size / resolution))
        self.map = OccupancyGridMap(resolution, self.n, self.n, Pose2(-0.5 * self.n * resolution,
                                                                      -0.5 * self.n * resolution, 0.0))

    @property
    def resolution(self) -> float:
        return self.map.resolution

    def reanchor(self, x: float, y: float) -> None:
        m = self.map
        res = m.resolution
        # origin of the grid that would put (x, y) in the centre cell
        cx = math.floor(x / res) - self.n // 2
        cy = math.floor(y / res) - self.n // 2
        sx = cx - int(round(m.origin.x / res))
        sy = cy - int(round(m.origin.y / res))
        if sx == 0 and sy == 0:
            return
        m.cells = _shift(m.cells, sx, sy, 0.0)
        m.observed = _shift(m.observed, sx, sy, False)
        m.origin = Pose2(cx * res, cy * res, 0.0)

    def update(self, robot: Pose2, scan_points: np.ndarray, static_hits: Sequence[Point2]) -> None:
        """Clear cells along every ray to ``scan_points`` and add hits at
        ``static_hits`` (all in the odometry frame)."""
        self.reanchor(robot.x, robot.y)
        m = self.map
        hits = np.array([[p.x, p.y] for p in static_hits]).reshape(-1, 2)
        ends = np.vstack([np.asarray(scan_points, dtype=float).reshape(-1, 2), hits])
        cells = m.world_to_cell(ends)
        mask = np.zeros(cells.shape[0], dtype=np.bool_)
        mask[len(ends) - len(hits):] = True
        start = m.world_to_cell(np.array([[robot.x, robot.y]]))[0]
        _kernels.trace_rays(m.cells, m.observed, int(start[0]), int(start[1]), np.ascontiguousarray(cells),
                            mask, GRID_MISS, GRID_HIT, L_MIN, L_MAX)

    def is_free(self, p: Point2) -> bool:
        ix, iy = self.map.world_to_cell(np.array([[p.x, p.y]]))[0]
        if not self.map.in_bounds(ix, iy):
            return True
        return bool(self.map.cells[iy, ix] <= GRID_OCCUPIED)


def _shift(a: np.ndarray, sx: int, sy: int, fill) -> np.ndarray:
    """Content at new index i comes from old index i + s."""
    out = np.full_like(a, fill)
    h, w = a.shape
    if abs(sx) >= w or abs(sy) >= h:
        return out
    src_x = slice(max(sx, 0), w + min(sx, 0))
    dst_x = slice(max(-sx, 0), w + min(-sx, 0))
    src_y = slice(max(sy, 0), h + min(sy, 0))
    dst_y = slice(max(-sy, 0), h + min(-sy, 0))
    out[dst_y, dst_x] = a[src_y, src_x]
    return out
