"""Remove LiDAR returns that belong to tracked people."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .core import Scan, scan_points_array


@dataclass(frozen=True)
class FilteredScan:
    scan: Scan
    removed_count: int
    removed_indices: Tuple[int, ...]


def filter_scan(scan: Scan, leg_points: Sequence[Sequence[float]], zeta: float = 0.35) -> FilteredScan:
    """Flag invalid every valid beam whose endpoint is strictly closer than
    ``zeta`` to one of ``leg_points`` (sensor frame). Ranges are untouched."""
    legs = np.asarray(leg_points, dtype=float).reshape(-1, 2)
    if legs.shape[0] == 0:
        return FilteredScan(scan, 0, ())
    pts, idx = scan_points_array(scan, with_index=True)
    if idx.size == 0:
        return FilteredScan(scan, 0, ())
    d = np.hypot(pts[:, None, 0] - legs[None, :, 0], pts[:, None, 1] - legs[None, :, 1])
    hit = idx[(d < zeta).any(axis=1)]
    if hit.size == 0:
        return FilteredScan(scan, 0, ())
    valid = scan.valid.copy()
    valid[hit] = False
    return FilteredScan(scan.with_valid(valid), int(hit.size), tuple(int(i) for i in hit))
