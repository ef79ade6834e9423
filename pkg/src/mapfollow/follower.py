"""Leader selection and PID person following."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

from .core import Point2, Pose2


@dataclass
class PID:
    kp: float
    ki: float = 0.0
    kd: float = 0.0
    integral_limit: float = 1.0
    integral: float = 0.0
    prev_error: Optional[float] = None

    def step(self, error: float, dt: float) -> float:
        self.integral = min(self.integral_limit, max(-self.integral_limit, self.integral + error * dt))
        deriv = 0.0 if self.prev_error is None else (error - self.prev_error) / dt
        self.prev_error = error
        return self.kp * error + self.ki * self.integral + self.kd * deriv

    def reset(self) -> None:
        self.integral = 0.0
        self.prev_error = None


# Tuned so a leader walking at 0.8 m/s is held at about 1 m: the integral
# carries the cruise speed and the clamp bounds it near v_max.
def _default_linear() -> PID:
    return PID(3.0, 2.25, 0.1, integral_limit=1.0)


def _default_angular() -> PID:
    return PID(1.5, 0.0, 0.2, integral_limit=1.0)


@dataclass
class FollowerState:
    follow_distance: float = 1.0
    v_max: float = 1.3
    w_max: float = 1.5
    pid_linear: PID = field(default_factory=_default_linear)
    pid_angular: PID = field(default_factory=_default_angular)
    target_id: Optional[int] = None
    error_flag: bool = False


def select_target(state: FollowerState, persons: Sequence, robot: Pose2) -> Optional[int]:
    """Keep the current target while it is alive, else take the person
    closest to ``robot`` (positions in the same frame as ``robot``)."""
    alive = {p.id: p for p in persons}
    if state.target_id in alive:
        return state.target_id
    if state.target_id is not None:
        state.pid_linear.reset()
        state.pid_angular.reset()
    state.target_id = None
    if alive:
        state.target_id = min(alive.values(),
                              key=lambda p: (math.hypot(p.position.x - robot.x, p.position.y - robot.y), p.id)).id
    return state.target_id


def _clamp(v: float, lim: float) -> float:
    return min(lim, max(-lim, v))


def follow_step(state: FollowerState, target: Optional[Point2], dt: float) -> Tuple[float, float]:
    """Velocity command toward ``target`` (robot frame); ``None`` stops."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    state.error_flag = False
    if target is None:
        return 0.0, 0.0
    if not (math.isfinite(target.x) and math.isfinite(target.y)):
        state.error_flag = True
        return 0.0, 0.0
    e_d = math.hypot(target.x, target.y) - state.follow_distance
    e_th = math.atan2(target.y, target.x)
    v = _clamp(state.pid_linear.step(e_d, dt), state.v_max)
    w = _clamp(state.pid_angular.step(e_th, dt), state.w_max)
    return max(0.0, v), w
