"""Scan segmentation and leg scoring."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from .core import Point2, Scan, TrackerConfig, scan_points_array

# shape bands for a human leg seen by a planar LiDAR
LEG_WIDTH_BAND = (0.05, 0.25)
LEG_RADIUS_BAND = (0.02, 0.20)
MAX_LEG_POINTS = 100
RESIDUAL_SCALE = 0.015


@dataclass(frozen=True)
class Cluster:
    points: np.ndarray          # (n, 2) sensor frame, scan order
    centroid: Point2
    confidence: float = 0.0
    first_beam: int = -1
    last_beam: int = -1

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    @property
    def width(self) -> float:
        return float(np.hypot(*(self.points[-1] - self.points[0])))

    def with_confidence(self, c: float) -> "Cluster":
        return Cluster(self.points, self.centroid, float(c), self.first_beam, self.last_beam)


def make_cluster(points: np.ndarray, confidence: float = 0.0, first_beam: int = -1, last_beam: int = -1) -> Cluster:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    m = pts.mean(axis=0)
    return Cluster(pts, Point2(float(m[0]), float(m[1])), confidence, first_beam, last_beam)


def cluster_scan(scan: Scan, config: TrackerConfig) -> List[Cluster]:
    """Split valid returns (in bearing order) wherever consecutive points are
    at least ``alpha`` apart; drop clusters with fewer than ``beta`` points and
    clusters that reach out to the sensor's maximum range."""
    pts, idx = scan_points_array(scan, with_index=True)
    if pts.shape[0] == 0:
        return []
    gaps = np.hypot(*np.diff(pts, axis=0).T)
    breaks = np.flatnonzero(gaps >= config.alpha) + 1
    starts = np.concatenate([[0], breaks])
    ends = np.concatenate([breaks, [pts.shape[0]]])
    far = scan.ranges[idx] >= 0.99 * scan.range_max
    out = []
    for s, e in zip(starts, ends):
        if e - s < config.beta or far[s:e].any():
            continue
        out.append(make_cluster(pts[s:e], 0.0, int(idx[s]), int(idx[e - 1])))
    return out


def fit_circle(pts: np.ndarray):
    """Algebraic least-squares circle; returns ``(cx, cy, radius, rms)`` or None
    when the points are (numerically) collinear."""
    m = pts.mean(axis=0)
    u = pts - m
    a = np.column_stack([u, np.ones(len(u))])
    b = (u * u).sum(axis=1)
    sol, _, rank, sv = np.linalg.lstsq(a, b, rcond=None)
    if rank < 3 or sv[-1] < 1e-9 * max(sv[0], 1e-300):
        return None
    cx, cy = 0.5 * sol[0], 0.5 * sol[1]
    r2 = sol[2] + cx * cx + cy * cy
    if r2 <= 0:
        return None
    r = math.sqrt(r2)
    rms = float(np.sqrt(np.mean((np.hypot(u[:, 0] - cx, u[:, 1] - cy) - r) ** 2)))
    return cx + m[0], cy + m[1], r, rms


def _band(x: float, lo: float, hi: float, soft_lo: float, soft_hi: float) -> float:
    if x < lo:
        return max(0.0, 1.0 - (lo - x) / soft_lo)
    if x > hi:
        return max(0.0, 1.0 - (x - hi) / soft_hi)
    return 1.0


def score_cluster(cluster: Cluster) -> float:
    """Deterministic leg-likeness in [0, 1].

    Product of soft memberships: overall width, fitted circle radius, circle
    fit residual, convexity towards the sensor and a point-count term that
    keeps tiny clusters strictly below 1.
    """
    pts = cluster.points
    n = pts.shape[0]
    if n < 3:
        return 0.0
    width = cluster.width
    w_s = _band(width, *LEG_WIDTH_BAND, 0.04, 0.1)
    if w_s == 0.0:
        return 0.0
    count_s = (1.0 - 0.5 ** (n - 2)) * _band(n, 0, MAX_LEG_POINTS, 1, MAX_LEG_POINTS)
    fit = fit_circle(pts)
    if fit is None:
        return 0.0
    cx, cy, r, rms = fit
    r_s = _band(r, *LEG_RADIUS_BAND, 0.02, 0.3)
    res_s = math.exp(-((rms / RESIDUAL_SCALE) ** 2))
    # a leg bulges towards the sensor: its center lies beyond the points
    c = cluster.centroid
    convex_s = 1.0 if math.hypot(cx, cy) > math.hypot(c.x, c.y) else 0.1
    return float(min(1.0, max(0.0, w_s * count_s * r_s * res_s * convex_s)))


LegScorer = Callable[[Cluster], float]


def detect(scan: Scan, config: TrackerConfig, scorer: LegScorer = score_cluster) -> List[Cluster]:
    """Scored clusters with confidence >= gamma, in bearing order."""
    return [c for c in score_all(cluster_scan(scan, config), scorer) if c.confidence >= config.gamma]


def score_all(clusters: Sequence[Cluster], scorer: LegScorer = score_cluster) -> List[Cluster]:
    return [c.with_confidence(scorer(c)) for c in clusters]
