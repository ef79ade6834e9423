"""Map registration (PCA then ICP) and the ADNN map-quality metric."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .core import OccupancyGridMap

OCCUPIED_LOG_ODDS = 0.1


@dataclass(frozen=True)
class Registration:
    """Rigid map ``p -> R(rotation) p + translation`` applied to the estimate."""

    rotation: float = 0.0
    translation: Tuple[float, float] = (0.0, 0.0)
    rms_after: float = float("nan")
    iterations: int = 0
    rms_history: Tuple[float, ...] = ()

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return np.array([[c, -s], [s, c]])

    def apply(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts, dtype=float) @ self.matrix().T + np.asarray(self.translation)


def map_to_points(grid: OccupancyGridMap, threshold: float = OCCUPIED_LOG_ODDS) -> np.ndarray:
    """World-frame centres of occupied cells, row-major order."""
    iy, ix = np.nonzero(grid.cells > threshold)
    if ix.size == 0:
        raise ValueError("map has no occupied cells")
    return grid.cell_centers(ix, iy)


def nn_distances(query: np.ndarray, ref: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Distance from every query point to its nearest reference point, and
    that point's index. Distances are recomputed from coordinates so they
    do not depend on the tree's internal arithmetic."""
    query = np.asarray(query, dtype=float).reshape(-1, 2)
    ref = np.asarray(ref, dtype=float).reshape(-1, 2)
    _, idx = cKDTree(ref).query(query, k=1)
    d = ref[idx] - query
    return np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]), idx


def _principal_angle(pts: np.ndarray):
    cov = np.cov(pts.T, bias=True)
    w, v = np.linalg.eigh(cov)
    if w[0] <= 1e-9 * max(1.0, w[1]) and w[0] <= 1e-9:
        return None
    return math.atan2(v[1, 1], v[0, 1])


def pca_coarse_align(est: np.ndarray, gt: np.ndarray) -> Registration:
    """Centroid alignment plus rotation between first principal axes.

    Both 180-degree candidates are scored by mean nearest-neighbour
    distance (est to gt) and the better one kept.
    """
    est = np.asarray(est, dtype=float)
    gt = np.asarray(gt, dtype=float)
    ce, cg = est.mean(axis=0), gt.mean(axis=0)
    ae, ag = _principal_angle(est), _principal_angle(gt)
    if ae is None or ag is None:
        t = cg - ce
        return Registration(0.0, (float(t[0]), float(t[1])))
    best = None
    for rot in (ag - ae, ag - ae + math.pi):
        rot = math.remainder(rot, 2 * math.pi)
        c, s = math.cos(rot), math.sin(rot)
        R = np.array([[c, -s], [s, c]])
        t = cg - R @ ce
        reg = Registration(rot, (float(t[0]), float(t[1])))
        score = float(nn_distances(reg.apply(est), gt)[0].mean())
        if best is None or score < best[0]:
            best = (score, reg)
    return best[1]


def _kabsch(src: np.ndarray, dst: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    cs, cd = src.mean(axis=0), dst.mean(axis=0)
    h = (src - cs).T @ (dst - cd)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    R = vt.T @ np.diag([1.0, d]) @ u.T
    return R, cd - R @ cs


def icp_refine(est: np.ndarray, gt: np.ndarray, init: Registration = Registration(),
               max_iter: int = 50, tol: float = 1e-4) -> Registration:
    """Point-to-point ICP from ``init``; stops when the RMS changes by less
    than ``tol`` or after ``max_iter`` iterations. ``rms_history`` holds the
    correspondence RMS before each iteration's solve plus the final value."""
    est = np.asarray(est, dtype=float)
    gt = np.asarray(gt, dtype=float)
    tree = cKDTree(gt)
    R = init.matrix()
    t = np.asarray(init.translation, dtype=float)

    def rms_of(R, t):
        cur = est @ R.T + t
        _, idx = tree.query(cur, k=1)
        d = gt[idx] - cur
        return float(np.sqrt(np.mean(d[:, 0] ** 2 + d[:, 1] ** 2))), idx

    rms, idx = rms_of(R, t)
    history = [rms]
    it = 0
    while it < max_iter:
        it += 1
        dR, dt = _kabsch(est @ R.T + t, gt[idx])
        nR, nt = dR @ R, dR @ t + dt
        new_rms, new_idx = rms_of(nR, nt)
        if new_rms > rms:
            # cannot happen in exact arithmetic; keep the better transform
            break
        R, t, idx = nR, nt, new_idx
        history.append(new_rms)
        done = rms - new_rms < tol
        rms = new_rms
        if done:
            break
    return Registration(math.atan2(R[1, 0], R[0, 0]), (float(t[0]), float(t[1])), rms, it, tuple(history))


def register(est: np.ndarray, gt: np.ndarray) -> Registration:
    return icp_refine(est, gt, pca_coarse_align(est, gt))


def adnn(est: np.ndarray, gt: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean over ground-truth points of the distance to the nearest estimate point."""
    d, _ = nn_distances(gt, est)
    return float(d.mean()), d


@dataclass
class EvalReport:
    registration: Registration
    adnn_mean: float
    stats: dict
    n_est: int
    n_gt: int

    def to_dict(self) -> dict:
        r = self.registration
        return {
            "adnn_mean": round(self.adnn_mean, 9),
            "adnn_stats": {k: round(v, 9) for k, v in self.stats.items()},
            "n_est_points": self.n_est,
            "n_gt_points": self.n_gt,
            "registration": {
                "rotation": round(r.rotation, 12),
                "translation": [round(r.translation[0], 12), round(r.translation[1], 12)],
                "rms_after": round(r.rms_after, 12),
                "iterations": r.iterations,
            },
        }


def box_stats(values: np.ndarray) -> dict:
    v = np.asarray(values, dtype=float)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"mean": float(v.mean()), "min": float(v.min()), "q1": float(q1), "median": float(med),
            "q3": float(q3), "max": float(v.max())}


def evaluate_points(est: np.ndarray, gt: np.ndarray) -> EvalReport:
    reg = register(est, gt)
    mean, per = adnn(reg.apply(est), gt)
    return EvalReport(reg, mean, box_stats(per), int(len(est)), int(len(gt)))


def evaluate_maps(est: OccupancyGridMap, gt: OccupancyGridMap) -> EvalReport:
    return evaluate_points(map_to_points(est), map_to_points(gt))
