"""Small synthetic worlds shared by the tests."""
import math

import numpy as np

from mapfollow.core import Point2, Pose2
from mapfollow.simulator import LEADER, PedestrianState, WorldModel


def box_walls(x0, y0, x1, y1):
    return np.array([[x0, y0, x1, y0], [x1, y0, x1, y1], [x1, y1, x0, y1], [x0, y1, x0, y0]], dtype=float)


def room(robot=Pose2(5.0, 5.0, 0.0), pedestrians=(), seed=0):
    return WorldModel(box_walls(0, 0, 10, 10), tuple(pedestrians), robot, seed)


def pedestrian(x, y, heading=0.0, speed=0.0, path=None, phase=0.0, role=LEADER, **kw):
    path = tuple(Point2(*p) for p in (path or [(x, y)]))
    return PedestrianState(Point2(x, y), heading, speed, phase, path, role, **kw)


FORWARD = 540          # beam index with bearing 0 for the default LiDAR


def leg_arc(radius=0.06, n=8, center=(2.0, 0.0), span=math.radians(140)):
    """Visible side of a leg circle as seen from the origin."""
    cx, cy = center
    facing = math.atan2(-cy, -cx)
    a = facing + np.linspace(-span / 2, span / 2, n)
    return np.column_stack([cx + radius * np.cos(a), cy + radius * np.sin(a)])
