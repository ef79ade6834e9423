"""Global nearest neighbour association with a distance gate."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..detection import Cluster
from .kalman import LegTrack

# stands in for "forbidden" so the solver never prefers it to a dummy column
_FORBIDDEN = 1e9


def solve_assignment(cost: np.ndarray) -> List[Tuple[int, int]]:
    """Minimum-cost assignment for a (possibly rectangular) cost matrix.

    Returns ``(row, col)`` pairs covering ``min(rows, cols)`` entries.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.size == 0:
        return []
    rows, cols = linear_sum_assignment(cost)
    return [(int(r), int(c)) for r, c in zip(rows, cols)]


@dataclass(frozen=True)
class Assignment:
    pairs: Tuple[Tuple[int, int], ...]        # (track index, detection index)
    unmatched_tracks: Tuple[int, ...]
    unmatched_detections: Tuple[int, ...]


def cost_matrix(tracks: Sequence[LegTrack], detections: Sequence[np.ndarray]) -> np.ndarray:
    """Euclidean distances between predicted track positions and detections."""
    t = np.array([tr.state[:2] for tr in tracks]).reshape(-1, 2)
    d = np.asarray(detections, dtype=float).reshape(-1, 2)
    return np.hypot(t[:, None, 0] - d[None, :, 0], t[:, None, 1] - d[None, :, 1])


def associate_points(tracks: Sequence[LegTrack], points: Sequence[np.ndarray], gate: float) -> Assignment:
    """Associate tracks with detection positions (same frame as the tracks).

    Every track gets a private dummy column priced at ``gate``, so leaving a
    track unmatched is always feasible and any pair farther than the gate
    can never be part of an optimal solution.
    """
    n_t, n_d = len(tracks), len(points)
    if n_t == 0 or n_d == 0:
        return Assignment((), tuple(range(n_t)), tuple(range(n_d)))
    c = cost_matrix(tracks, points)
    padded = np.full((n_t, n_d + n_t), _FORBIDDEN)
    padded[:, :n_d] = np.where(c > gate, _FORBIDDEN, c)
    padded[np.arange(n_t), n_d + np.arange(n_t)] = gate
    pairs = []
    for r, col in solve_assignment(padded):
        if col < n_d and c[r, col] <= gate:
            pairs.append((r, col))
    mt = {p[0] for p in pairs}
    md = {p[1] for p in pairs}
    return Assignment(tuple(sorted(pairs)), tuple(i for i in range(n_t) if i not in mt),
                      tuple(j for j in range(n_d) if j not in md))


def associate(tracks: Sequence[LegTrack], detections: Sequence[Cluster], gate: float = 0.75) -> Assignment:
    """Association against cluster centroids; tracks and clusters must share a frame."""
    return associate_points(tracks, [np.array([d.centroid.x, d.centroid.y]) for d in detections], gate)
