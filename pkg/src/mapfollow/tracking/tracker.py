"""Leg tracking, person initiation and deletion, one scan at a time."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core import Point2, Pose2, Scan, TrackerConfig, scan_points_array, transform_points
from ..detection import Cluster, LegScorer, cluster_scan, score_all, score_cluster
from ..simulator import OdometryReading
from .association import associate_points
from .kalman import KalmanModel, LegTrack, kf_predict, kf_update, new_track, update_confidence
from .local_grid import LocalGrid


@dataclass(frozen=True)
class PersonTrack:
    id: int
    leg_ids: Tuple[int, int]
    position: Point2
    velocity: np.ndarray
    confidence: float
    legs: Tuple[Point2, Point2]


@dataclass
class TrackerState:
    config: TrackerConfig = field(default_factory=TrackerConfig)
    legs: Dict[int, LegTrack] = field(default_factory=dict)
    # person id -> pair of leg ids
    persons: Dict[int, Tuple[int, int]] = field(default_factory=dict)
    grid: LocalGrid = field(default_factory=LocalGrid)
    time: Optional[float] = None
    next_leg_id: int = 0
    next_person_id: int = 0
    dt: float = 1.0 / 40.0
    scorer: LegScorer = score_cluster


@dataclass(frozen=True)
class TrackerOutput:
    """Tracks after one step, in the odometry frame."""

    persons: Tuple[PersonTrack, ...]
    legs: Tuple[LegTrack, ...]
    detections: Tuple[Point2, ...]
    pairs: Tuple[Tuple[int, int], ...]        # (leg id, detection index)

    def person_leg_points(self) -> np.ndarray:
        pts = [(p.x, p.y) for person in self.persons for p in person.legs]
        return np.array(pts, dtype=float).reshape(-1, 2)


def person_view(state: TrackerState, pid: int) -> PersonTrack:
    a, b = (state.legs[i] for i in state.persons[pid])
    pa, pb = a.position, b.position
    mid = Point2(0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y))
    vel = 0.5 * (a.velocity + b.velocity)
    return PersonTrack(pid, state.persons[pid], mid, vel, min(a.confidence, b.confidence), (pa, pb))


def _leg_ids_in_persons(state: TrackerState) -> set:
    return {i for pair in state.persons.values() for i in pair}


def delete_tracks(state: TrackerState) -> List[int]:
    """Drop legs whose ``P[0][0]`` exceeds epsilon or whose confidence fell
    below ``c_min``; persons lose their status with either leg. Returns the
    deleted leg ids."""
    cfg = state.config
    dead = [i for i, t in state.legs.items() if t.covariance[0, 0] > cfg.epsilon or t.confidence < cfg.c_min]
    for i in dead:
        del state.legs[i]
    gone = set(dead)
    for pid in [p for p, pair in state.persons.items() if gone.intersection(pair)]:
        del state.persons[pid]
    return dead


def initiate_person_tracks(state: TrackerState) -> List[int]:
    """Pair unpaired legs (nearest pairs first) into persons.

    A pair qualifies when the legs are within ``pair_distance``, each has
    travelled at least ``delta``, has confidence at least ``c_min`` and
    sits in a free cell of the local grid. Returns the new person ids.
    """
    cfg = state.config
    taken = _leg_ids_in_persons(state)
    cand = [t for i, t in sorted(state.legs.items()) if i not in taken
            and t.travel >= cfg.delta and t.confidence >= cfg.c_min and state.grid.is_free(t.position)]
    pairs = []
    for a in range(len(cand)):
        for b in range(a + 1, len(cand)):
            d = float(np.hypot(*(cand[a].state[:2] - cand[b].state[:2])))
            if d <= cfg.pair_distance:
                pairs.append((d, cand[a].id, cand[b].id))
    pairs.sort()
    new = []
    for _, i, j in pairs:
        if i in taken or j in taken:
            continue
        taken.update((i, j))
        pid = state.next_person_id
        state.next_person_id += 1
        state.persons[pid] = (i, j)
        new.append(pid)
    return new


def tracker_step(state: TrackerState, scan: Scan, odom: OdometryReading) -> TrackerOutput:
    """Advance the tracker by one scan; everything is kept in the odometry frame."""
    cfg = state.config
    t = scan.timestamp
    if state.time is not None:
        if t <= state.time:
            raise ValueError("scan timestamps must increase")
        dt = t - state.time
    else:
        dt = state.dt
    state.time = t
    pose = odom.pose
    model = KalmanModel(dt, cfg.q, cfg.r)

    clusters = score_all(cluster_scan(scan, cfg), state.scorer)
    dets = [c for c in clusters if c.confidence >= cfg.gamma]
    weak = [c for c in clusters if c.confidence < cfg.gamma]
    det_xy = transform_points(np.array([[c.centroid.x, c.centroid.y] for c in dets]).reshape(-1, 2), pose)

    ids = sorted(state.legs)
    tracks = [kf_predict(state.legs[i], model) for i in ids]
    asg = associate_points(tracks, list(det_xy), cfg.gate)
    pairs = []
    for ti, di in asg.pairs:
        tr = kf_update(tracks[ti], Point2(*det_xy[di]), model, t)
        tracks[ti] = replace(tr, confidence=update_confidence(tr.confidence, dets[di].confidence))
        pairs.append((ids[ti], di))
    for ti in asg.unmatched_tracks:
        tracks[ti] = replace(tracks[ti], confidence=update_confidence(tracks[ti].confidence, None))
    state.legs = {i: tr for i, tr in zip(ids, tracks)}
    for di in asg.unmatched_detections:
        lid = state.next_leg_id
        state.next_leg_id += 1
        state.legs[lid] = new_track(lid, Point2(*det_xy[di]), dets[di].confidence, t, cfg.p0)

    # static evidence for the local grid: weak clusters, fresh detections and
    # detections of legs that have not moved yet
    static = [c.centroid for c in weak]
    matched = dict((di, lid) for lid, di in pairs)
    in_person = _leg_ids_in_persons(state)
    for di, c in enumerate(dets):
        lid = matched.get(di)
        if lid is None or (lid not in in_person and state.legs[lid].travel < cfg.delta):
            static.append(c.centroid)
    static_xy = transform_points(np.array([[p.x, p.y] for p in static]).reshape(-1, 2), pose)
    state.grid.update(pose, scan_points_array(scan, pose), [Point2(*p) for p in static_xy])

    delete_tracks(state)
    initiate_person_tracks(state)
    persons = tuple(person_view(state, pid) for pid in sorted(state.persons))
    return TrackerOutput(persons, tuple(state.legs[i] for i in sorted(state.legs)),
                         tuple(Point2(*p) for p in det_xy), tuple(pairs))


def to_sensor_frame(points: np.ndarray, odom_pose: Pose2) -> np.ndarray:
    """Odometry-frame points expressed in the robot (sensor) frame."""
    return transform_points(points, odom_pose.inverse())
