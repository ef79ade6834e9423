"""Constant-velocity Kalman filter for individual leg tracks."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ..core import Point2


@dataclass(frozen=True)
class KalmanModel:
    dt: float
    q: float = 0.05
    r: float = 0.1

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not (self.q >= 0 and self.r > 0):
            raise ValueError("need q >= 0 and r > 0")

    @property
    def A(self) -> np.ndarray:
        a = np.eye(4)
        a[0, 2] = a[1, 3] = self.dt
        return a

    @property
    def H(self) -> np.ndarray:
        return np.eye(2, 4)

    @property
    def Q(self) -> np.ndarray:
        return self.q * np.eye(4)

    @property
    def R(self) -> np.ndarray:
        return self.r * np.eye(2)


@dataclass(frozen=True)
class LegTrack:
    """One tracked leg in the odometry frame.

    ``travel`` is the path length covered so far, accumulated in steps of
    at least ``TRAVEL_QUANTUM`` from ``anchor`` so that jitter of a still
    leg does not add up.
    """

    id: int
    state: np.ndarray           # [x, y, vx, vy]
    covariance: np.ndarray      # 4x4
    confidence: float
    last_update: float
    travel: float = 0.0
    anchor: Optional[np.ndarray] = None
    hits: int = 1

    @property
    def position(self) -> Point2:
        return Point2(float(self.state[0]), float(self.state[1]))

    @property
    def velocity(self) -> np.ndarray:
        return self.state[2:4].copy()


TRAVEL_QUANTUM = 0.05


def new_track(track_id: int, pos: Point2, confidence: float, t: float, p0: float = 0.05) -> LegTrack:
    """Track seeded at a detection: state ``[x y 0 0]``, covariance ``p0 * I``."""
    state = np.array([pos.x, pos.y, 0.0, 0.0])
    return LegTrack(track_id, state, p0 * np.eye(4), float(confidence), t, 0.0, state[:2].copy())


def kf_predict(track: LegTrack, model: KalmanModel) -> LegTrack:
    A = model.A
    x = A @ track.state
    P = A @ track.covariance @ A.T + model.Q
    P = 0.5 * (P + P.T)
    return replace(track, state=x, covariance=P)


def kf_update(track: LegTrack, obs: Point2, model: KalmanModel, t: Optional[float] = None) -> LegTrack:
    """Standard measurement update with a position observation."""
    P = track.covariance
    if not np.all(np.isfinite(P)):
        raise ValueError("non-finite predicted covariance")
    H = model.H
    S = H @ P @ H.T + model.R
    if abs(np.linalg.det(S)) < 1e-15:
        raise np.linalg.LinAlgError("singular innovation covariance")
    K = np.linalg.solve(S, H @ P).T          # P H^T S^-1, S symmetric
    y = np.array([obs.x, obs.y]) - H @ track.state
    x = track.state + K @ y
    P = (np.eye(4) - K @ H) @ P
    P = 0.5 * (P + P.T)
    return _moved(replace(track, state=x, covariance=P, last_update=track.last_update if t is None else t,
                          hits=track.hits + 1))


def _moved(track: LegTrack) -> LegTrack:
    anchor = track.anchor if track.anchor is not None else track.state[:2]
    step = float(np.hypot(*(track.state[:2] - anchor)))
    if step < TRAVEL_QUANTUM:
        return track
    return replace(track, travel=track.travel + step, anchor=track.state[:2].copy())


def update_confidence(c: float, d_c: Optional[float] = None) -> float:
    """``0.95 c + 0.05 d_c``; an unmatched track (``d_c is None``) uses 0."""
    d = 0.0 if d_c is None else float(d_c)
    if not 0.0 <= d <= 1.0:
        raise ValueError("detection confidence must lie in [0, 1]")
    return min(1.0, max(0.0, 0.95 * float(c) + 0.05 * d))
