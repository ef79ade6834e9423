"""Closed-loop scenario runner, batch protocol and map comparison."""
from __future__ import annotations

import dataclasses
import json
import math
import os
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core import OccupancyGridMap, Point2, Pose2, TrackerConfig, normalize_angle, transform_points
from ..evaluation import EvalReport, box_stats, evaluate_maps, evaluate_points, map_to_points
from ..follower import PID, FollowerState, follow_step, select_target
from ..person_filter import filter_scan
from ..simulator import HIT_LEG, HIT_WALL, DriftParams, Simulation
from ..slam import MatcherConfig, SlamConfig, SlamState, slam_step
from ..tracking import TrackerState, to_sensor_frame, tracker_step
from .mapio import load_map, save_map
from .scenario import Scenario, WorldSpec


class RunAborted(RuntimeError):
    pass


# ---------------------------------------------------------------- configs


def _fields(cls) -> set:
    return {f.name for f in dataclasses.fields(cls)}


def tracker_config(overrides: Dict) -> TrackerConfig:
    bad = set(overrides) - _fields(TrackerConfig)
    if bad:
        raise ValueError(f"unknown tracker parameters: {sorted(bad)}")
    return TrackerConfig(**overrides)


def slam_config(overrides: Dict) -> SlamConfig:
    m = {k: v for k, v in overrides.items() if k in _fields(MatcherConfig)}
    s = {k: v for k, v in overrides.items() if k in _fields(SlamConfig) and k != "matcher"}
    bad = set(overrides) - set(m) - set(s)
    if bad:
        raise ValueError(f"unknown slam parameters: {sorted(bad)}")
    if "linear_step" not in m and "resolution" in s:
        m["linear_step"] = s["resolution"]
    return SlamConfig(matcher=MatcherConfig(**m), **s)


def follower_state(overrides: Dict) -> FollowerState:
    st = FollowerState()
    for k, v in overrides.items():
        if k in ("linear", "angular"):
            pid: PID = st.pid_linear if k == "linear" else st.pid_angular
            for pk, pv in dict(v).items():
                if pk not in ("kp", "ki", "kd", "integral_limit"):
                    raise ValueError(f"unknown PID parameter {k}.{pk}")
                setattr(pid, pk, float(pv))
        elif k in ("follow_distance", "v_max", "w_max"):
            setattr(st, k, float(v))
        else:
            raise ValueError(f"unknown follower parameter {k!r}")
    return st


# ---------------------------------------------------------------- scripted drive


class WaypointDriver:
    """Slow pure-pursuit drive through a list of waypoints, then stop."""

    def __init__(self, path: Sequence[Tuple[float, float]], speed: float = 0.4, reach: float = 0.5,
                 w_max: float = 1.0):
        self.path = [tuple(p) for p in path]
        self.speed = speed
        self.reach = reach
        self.w_max = w_max
        self.i = 0

    def command(self, pose: Pose2) -> Tuple[float, float]:
        while self.i < len(self.path) - 1 and math.hypot(self.path[self.i][0] - pose.x,
                                                         self.path[self.i][1] - pose.y) < self.reach:
            self.i += 1
        tx, ty = self.path[self.i]
        d = math.hypot(tx - pose.x, ty - pose.y)
        last = self.i == len(self.path) - 1
        if last and d < 0.05:
            return 0.0, 0.0
        err = normalize_angle(math.atan2(ty - pose.y, tx - pose.x) - pose.theta)
        v = min(self.speed, 0.8 * d) if last else self.speed
        w = max(-self.w_max, min(self.w_max, 2.0 * err))
        return v * max(0.0, math.cos(err)), w


# ---------------------------------------------------------------- run


@dataclass
class FilterStats:
    leg_beams: int = 0
    leg_removed: int = 0
    wall_beams: int = 0
    wall_removed: int = 0

    def add(self, kind: np.ndarray, removed: Sequence[int]) -> None:
        rm = np.zeros(kind.shape[0], dtype=bool)
        rm[list(removed)] = True
        self.leg_beams += int((kind == HIT_LEG).sum())
        self.leg_removed += int(((kind == HIT_LEG) & rm).sum())
        self.wall_beams += int((kind == HIT_WALL).sum())
        self.wall_removed += int(((kind == HIT_WALL) & rm).sum())

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class RunResult:
    scenario: Scenario
    slam: SlamState
    truth: List[Pose2]                 # robot truth relative to its start, per tick
    estimate: List[Pose2]              # SLAM pose per tick
    odometry: List[Pose2]
    leader_distance: List[float]       # robot to leader truth distance, per tick
    commands: List[Tuple[float, float]]
    person_ids: List[Tuple[int, ...]]
    filter_stats: FilterStats
    converged_filter_stats: FilterStats
    wall_seen: set = field(default_factory=set)
    report: Optional[EvalReport] = None
    wall_time: float = 0.0
    out_dir: Optional[str] = None

    @property
    def map(self) -> OccupancyGridMap:
        return self.slam.map

    def trajectory_errors(self) -> np.ndarray:
        return np.array([a.distance_to(b) for a, b in zip(self.truth, self.estimate)])


def _r(x: float, nd: int = 6) -> float:
    v = round(float(x), nd)
    return 0.0 if v == 0 else v


def run_scenario(scenario: Scenario, out_dir: Optional[str] = None, gt_map: Optional[OccupancyGridMap] = None,
                 record_walls: bool = False, progress=None) -> RunResult:
    """Run one scenario at 40 Hz; write artifacts to ``out_dir`` when given."""
    t_start = time.perf_counter()
    world = scenario.world.build(scenario.condition, scenario.seed)
    noise = scenario.noise
    sim = Simulation(world, noise.range_sigma, DriftParams(noise.odom_sigma_v, noise.odom_sigma_w))
    tcfg = tracker_config(scenario.tracker)
    tstate = TrackerState(config=tcfg, dt=sim.dt)
    slam = SlamState.empty(slam_config(scenario.slam))
    fstate = follower_state(scenario.follower)
    driver = WaypointDriver(scenario.world.drive_path, scenario.drive_speed) if scenario.condition == "no-people" \
        else None
    start = world.robot_truth
    n_ticks = int(round(scenario.duration * sim.lidar.rate_hz))
    if n_ticks < 1:
        raise ValueError("duration shorter than one scan period")
    res = RunResult(scenario, slam, [], [], [], [], [], [], FilterStats(), FilterStats())
    trace = []
    traj_rows = []
    for tick in range(n_ticks):
        scan, truth = sim.scan(return_truth=True)
        odom = sim.odometry()
        out = tracker_step(tstate, scan, odom)
        legs_odom = out.person_leg_points()
        legs_sensor = to_sensor_frame(legs_odom, odom.pose)
        removed: Tuple[int, ...] = ()
        fscan = scan
        if scenario.filter_enabled:
            fr = filter_scan(scan, legs_sensor, tcfg.zeta)
            fscan, removed = fr.scan, fr.removed_indices
            res.filter_stats.add(truth.kind, removed)
            if out.persons and len(out.persons) == len(sim.world.pedestrians):
                res.converged_filter_stats.add(truth.kind, removed)
        slam_step(slam, fscan, odom)
        if record_walls:
            _record_walls(res.wall_seen, sim.world.robot_truth.relative_to(start), scan, truth, slam.map)
        if driver is not None:
            cmd = driver.command(sim.world.robot_truth)
        else:
            tid = select_target(fstate, out.persons, odom.pose)
            target = None
            if tid is not None:
                p = next(p for p in out.persons if p.id == tid).position
                q = to_sensor_frame(np.array([[p.x, p.y]]), odom.pose)[0]
                target = Point2(float(q[0]), float(q[1]))
            cmd = follow_step(fstate, target, sim.dt)

        rel = sim.world.robot_truth.relative_to(start)
        res.truth.append(rel)
        res.estimate.append(slam.pose)
        res.odometry.append(odom.pose.relative_to(start))
        res.commands.append(cmd)
        res.person_ids.append(tuple(p.id for p in out.persons))
        leader = sim.world.leader()
        rt = sim.world.robot_truth
        res.leader_distance.append(math.hypot(leader.center.x - rt.x, leader.center.y - rt.y)
                                   if leader is not None else float("nan"))
        if out_dir is not None:
            traj_rows.append((tick, scan.timestamp, rel, odom.pose.relative_to(start), slam.pose, cmd))
            trace.append(_trace_record(tick, scan.timestamp, out, removed))
        try:
            sim.step(cmd)
        except ValueError as e:
            raise RunAborted(f"tick {tick}: {e}") from e
        if not sim.world.contains(sim.world.robot_truth.x, sim.world.robot_truth.y):
            raise RunAborted(f"tick {tick}: robot left the world bounds at {sim.world.robot_truth}")
        if progress is not None:
            progress(tick, n_ticks)
    if gt_map is not None:
        res.report = evaluate_maps(slam.map, gt_map)
    res.wall_time = time.perf_counter() - t_start
    if out_dir is not None:
        write_artifacts(res, out_dir, traj_rows, trace)
    return res


def _record_walls(seen: set, rel_pose: Pose2, scan, truth, grid: OccupancyGridMap) -> None:
    """Cells (on the SLAM map lattice, start frame) of exact wall hit points."""
    idx = np.flatnonzero(truth.kind == HIT_WALL)
    if idx.size == 0:
        return
    a = scan.angle_min + scan.angle_increment * idx
    r = truth.true_range[idx]
    pts = transform_points(np.column_stack([r * np.cos(a), r * np.sin(a)]), rel_pose)
    for key in set(map(tuple, _lattice_keys(pts, grid))):
        seen.add(key)


def _lattice_keys(pts: np.ndarray, grid: OccupancyGridMap) -> np.ndarray:
    # keys are absolute lattice indices, independent of later map growth
    res = grid.resolution
    off_x = grid.origin.x - round(grid.origin.x / res) * res
    off_y = grid.origin.y - round(grid.origin.y / res) * res
    kx = np.floor((pts[:, 0] - off_x) / res).astype(np.int64)
    ky = np.floor((pts[:, 1] - off_y) / res).astype(np.int64)
    return np.column_stack([kx, ky])


def wall_ground_truth(world: WorldSpec, seen: set, grid: OccupancyGridMap) -> np.ndarray:
    """Analytic rasterization of the walls, in the robot-start frame, kept
    where the sensor actually observed them. Returns cell centres."""
    start = Pose2(*world.robot_start)
    inv = start.inverse()
    res = grid.resolution
    keys = set()
    for x1, y1, x2, y2 in world.walls:
        n = int(math.ceil(math.hypot(x2 - x1, y2 - y1) / (0.25 * res))) + 1
        s = np.linspace(0.0, 1.0, n)
        pts = transform_points(np.column_stack([x1 + s * (x2 - x1), y1 + s * (y2 - y1)]), inv)
        keys.update(map(tuple, _lattice_keys(pts, grid)))
    keys &= seen
    if not keys:
        raise ValueError("no observed wall cells")
    k = np.array(sorted(keys), dtype=float)
    off_x = grid.origin.x - round(grid.origin.x / res) * res
    off_y = grid.origin.y - round(grid.origin.y / res) * res
    return np.column_stack([off_x + (k[:, 0] + 0.5) * res, off_y + (k[:, 1] + 0.5) * res])


def _trace_record(tick: int, t: float, out, removed) -> dict:
    return {
        "tick": tick,
        "t": _r(t),
        "detections": [[_r(p.x), _r(p.y)] for p in out.detections],
        "assignments": [list(p) for p in out.pairs],
        "legs": [[l.id, _r(l.state[0]), _r(l.state[1]), _r(l.confidence), _r(l.covariance[0, 0]), _r(l.travel)]
                 for l in out.legs],
        "persons": [[p.id, _r(p.position.x), _r(p.position.y), p.leg_ids[0], p.leg_ids[1]] for p in out.persons],
        "removed_beams": len(removed),
    }


def write_artifacts(res: RunResult, out_dir: str, traj_rows, trace) -> None:
    os.makedirs(out_dir, exist_ok=True)
    save_map(res.map, out_dir)
    with open(os.path.join(out_dir, "trajectory.csv"), "w") as f:
        f.write("tick,t,truth_x,truth_y,truth_theta,odom_x,odom_y,odom_theta,slam_x,slam_y,slam_theta,cmd_v,cmd_w\n")
        for tick, t, tr, od, est, cmd in traj_rows:
            vals = [t, *tr.as_tuple(), *od.as_tuple(), *est.as_tuple(), *cmd]
            f.write(f"{tick}," + ",".join(f"{_r(v, 9)}" for v in vals) + "\n")
    with open(os.path.join(out_dir, "tracker_trace.jsonl"), "w") as f:
        for rec in trace:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    if res.report is not None:
        write_report(res.report, os.path.join(out_dir, "eval_report.json"))
    errs = res.trajectory_errors()
    summary = {
        "scenario": res.scenario.name,
        "condition": res.scenario.condition,
        "seed": res.scenario.seed,
        "filter_enabled": res.scenario.filter_enabled,
        "ticks": len(res.truth),
        "max_trajectory_error": _r(errs.max(), 9),
        "final_trajectory_error": _r(errs[-1], 9),
        "filter": res.filter_stats.to_dict(),
        "person_ids": sorted({i for ids in res.person_ids for i in ids}),
    }
    with open(os.path.join(out_dir, "run_summary.json"), "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    # wall-clock time is kept apart so the other files stay byte-identical
    with open(os.path.join(out_dir, "timing.json"), "w") as f:
        json.dump({"wall_time_s": res.wall_time, "ticks": len(res.truth)}, f, indent=2)
        f.write("\n")


def write_report(report: EvalReport, path: str) -> None:
    with open(path, "w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------- batch


def ground_truth_scenario(scenario: Scenario) -> Scenario:
    """Noise-free scripted no-people drive in the same world."""
    from .scenario import Noise
    return scenario.with_(condition="no-people", noise=Noise(0.0, 0.0, 0.0), name=scenario.world.name + "_ground_truth")


def run_batch(scenario: Scenario, seeds: Sequence[int] = (1, 2, 3, 4, 5), out_dir: Optional[str] = None,
              conditions: Sequence[bool] = (True, False), gt_map: Optional[OccupancyGridMap] = None,
              log=None) -> dict:
    """Ground-truth run, then every seed with the filter on and off.

    Each map is registered to the ground-truth map and scored by ADNN.
    Failed runs are recorded and the batch carries on.
    """
    if len(seeds) < 1:
        raise ValueError("need at least one seed")
    if gt_map is None:
        gt_dir = None if out_dir is None else os.path.join(out_dir, "ground_truth")
        gt_map = run_scenario(ground_truth_scenario(scenario), gt_dir).map
    rows = []
    for seed in seeds:
        for flt in conditions:
            sc = scenario.with_(seed=int(seed), filter_enabled=bool(flt))
            tag = f"seed{seed}_{'filtered' if flt else 'raw'}"
            try:
                r = run_scenario(sc, None if out_dir is None else os.path.join(out_dir, tag), gt_map)
                rows.append({"seed": int(seed), "filter": bool(flt), "adnn_mean": r.report.adnn_mean,
                             "adnn_stats": r.report.stats, "wall_time_s": r.wall_time, "error": None})
            except Exception as e:  # noqa: BLE001 - batch reports partial results
                rows.append({"seed": int(seed), "filter": bool(flt), "adnn_mean": None, "adnn_stats": None,
                             "wall_time_s": None, "error": f"{type(e).__name__}: {e}"})
            if log is not None:
                log(rows[-1])
    summary = summarize(rows)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "batch_summary.json"), "w") as f:
            json.dump(_rounded(summary), f, indent=2, sort_keys=True)
            f.write("\n")
        with open(os.path.join(out_dir, "comparison.txt"), "w") as f:
            f.write(comparison_table(summary))
    return summary


def summarize(rows: List[dict]) -> dict:
    out = {"runs": rows, "conditions": {}}
    for flt in (True, False):
        vals = [r["adnn_mean"] for r in rows if r["filter"] == flt and r["adnn_mean"] is not None]
        if vals:
            out["conditions"]["filtered" if flt else "raw"] = box_stats(np.array(vals))
    by_seed = {}
    for r in rows:
        by_seed.setdefault(r["seed"], {})["filtered" if r["filter"] else "raw"] = r["adnn_mean"]
    out["paired"] = [{"seed": s, **v} for s, v in sorted(by_seed.items())]
    return out


def _rounded(obj):
    if isinstance(obj, float):
        return round(obj, 9)
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items() if k != "wall_time_s"}
    if isinstance(obj, list):
        return [_rounded(v) for v in obj]
    return obj


def comparison_table(summary: dict) -> str:
    lines = ["seed  filtered_adnn_m  raw_adnn_m", "----  ---------------  ----------"]

    def fmt(v):
        return "failed" if v is None else f"{v:.4f}"

    for row in summary["paired"]:
        lines.append(f"{row['seed']:>4}  {fmt(row.get('filtered')):>15}  {fmt(row.get('raw')):>10}")
    for name, st in summary["conditions"].items():
        lines.append(f"{name}: mean {st['mean']:.4f} min {st['min']:.4f} q1 {st['q1']:.4f} "
                     f"median {st['median']:.4f} q3 {st['q3']:.4f} max {st['max']:.4f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- compare


def compare_maps(est_path: str, gt_path: str, report_path: Optional[str] = None) -> EvalReport:
    est = load_map(est_path)
    gt = load_map(gt_path)
    report = evaluate_maps(est, gt)
    if report_path is not None:
        write_report(report, report_path)
    return report
