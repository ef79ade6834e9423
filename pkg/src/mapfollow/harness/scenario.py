"""World and scenario files (YAML) and the built-in library.

World file::

    name: corridor
    walls:                      # segments x1 y1 x2 y2 [m]
      - [0, -1.2, 25, -1.2]
    robot_start: [1.0, 0.0, 0.0]
    drive_path: [[22, 0]]       # scripted route for the no-people run
    pedestrians:
      - role: leader            # or bystander
        path: [[2.5, 0], [22.5, 0]]
        start_time: 0.0         # optional, seconds
        speed: 0.8              # optional cruise speed [m/s]

Scenario file::

    name: corridor_two_people
    world: corridor             # built-in name, or a path relative to this file
    condition: two-people       # no-people | one-person | two-people
    duration: 60.0
    seed: 1
    filter_enabled: true
    noise: {range_sigma: 0.01, odom_sigma_v: 0.05, odom_sigma_w: 0.02}
    drive_speed: 0.4            # no-people scripted drive
    follower: {}                # FollowerState / PID overrides
    tracker: {}                 # TrackerConfig overrides
    slam: {}                    # SlamConfig and MatcherConfig overrides
"""
from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Dict, List, Optional, Sequence, Tuple

import yaml

from ..core import Point2, Pose2
from ..simulator import BYSTANDER, LEADER, PedestrianState, WorldModel

CONDITIONS = ("no-people", "one-person", "two-people")


class ScenarioError(ValueError):
    """Malformed world or scenario file; the message carries file:line."""


@dataclass(frozen=True)
class PedestrianSpec:
    role: str
    path: Tuple[Tuple[float, float], ...]
    start_time: float = 0.0
    speed: float = 0.8


@dataclass(frozen=True)
class WorldSpec:
    name: str
    walls: Tuple[Tuple[float, float, float, float], ...]
    robot_start: Tuple[float, float, float]
    drive_path: Tuple[Tuple[float, float], ...]
    pedestrians: Tuple[PedestrianSpec, ...] = ()
    source: str = "<memory>"

    def build(self, condition: str, seed: int) -> WorldModel:
        if condition == "no-people":
            peds: Sequence[PedestrianSpec] = ()
        elif condition == "one-person":
            peds = [p for p in self.pedestrians if p.role == LEADER][:1]
        else:
            peds = list(self.pedestrians)
        states = []
        for p in peds:
            x, y = p.path[0]
            if len(p.path) > 1:
                heading = math.atan2(p.path[1][1] - y, p.path[1][0] - x)
            else:
                heading = 0.0
            states.append(PedestrianState(Point2(x, y), heading, 0.0, 0.0, tuple(Point2(*q) for q in p.path),
                                          role=p.role, nominal_speed=p.speed, start_time=p.start_time))
        return WorldModel(self.walls, tuple(states), Pose2(*self.robot_start), rng_seed=seed)


@dataclass(frozen=True)
class Noise:
    range_sigma: float = 0.01
    odom_sigma_v: float = 0.02
    odom_sigma_w: float = 0.01


@dataclass(frozen=True)
class Scenario:
    name: str
    world: WorldSpec
    condition: str = "two-people"
    duration: float = 60.0
    seed: int = 1
    filter_enabled: bool = True
    noise: Noise = field(default_factory=Noise)
    drive_speed: float = 0.4
    follower: Dict[str, Any] = field(default_factory=dict)
    tracker: Dict[str, Any] = field(default_factory=dict)
    slam: Dict[str, Any] = field(default_factory=dict)
    source: str = "<memory>"

    def __post_init__(self) -> None:
        if self.condition not in CONDITIONS:
            raise ScenarioError(f"unknown condition {self.condition!r}; expected one of {CONDITIONS}")
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ScenarioError("duration must be a positive number of seconds")
        if self.drive_speed <= 0:
            raise ScenarioError("drive_speed must be positive")

    def with_(self, **kw) -> "Scenario":
        return dataclasses.replace(self, **kw)


# ---------------------------------------------------------------- parsing


class _Doc:
    """Parsed YAML plus its node tree, for line-numbered error messages."""

    def __init__(self, text: str, source: str):
        self.source = source
        try:
            self.node = yaml.compose(text, Loader=yaml.SafeLoader)
            self.data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            where = f"{source}:{mark.line + 1}" if mark is not None else source
            raise ScenarioError(f"{where}: YAML syntax error: {getattr(e, 'problem', e)}") from None
        if not isinstance(self.data, dict):
            raise ScenarioError(f"{source}:1: expected a mapping at the top level")

    def line(self, path: Sequence) -> int:
        node = self.node
        line = node.start_mark.line + 1 if node is not None else 1
        for key in path:
            nxt = None
            if isinstance(node, yaml.MappingNode):
                for k, v in node.value:
                    if k.value == key:
                        nxt = v
                        break
            elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
                nxt = node.value[key]
            if nxt is None:
                break
            node = nxt
            line = node.start_mark.line + 1
        return line

    def fail(self, path: Sequence, msg: str):
        raise ScenarioError(f"{self.source}:{self.line(path)}: {msg}")

    def get(self, path: Sequence, default=..., kind=None):
        cur: Any = self.data
        for key in path:
            if isinstance(cur, dict) and key in cur:
                cur = cur[key]
            elif isinstance(cur, list) and isinstance(key, int) and key < len(cur):
                cur = cur[key]
            else:
                if default is ...:
                    self.fail(path[:-1], f"missing required field {'.'.join(map(str, path))!r}")
                return default
        if kind is not None:
            cur = self.convert(path, cur, kind)
        return cur

    def convert(self, path, value, kind):
        try:
            if kind is float:
                if isinstance(value, bool):
                    raise TypeError
                v = float(value)
                if not math.isfinite(v):
                    raise ValueError
                return v
            if kind is int:
                if isinstance(value, bool) or int(value) != value:
                    raise TypeError
                return int(value)
            if kind is bool:
                if not isinstance(value, bool):
                    raise TypeError
                return value
            if kind is str:
                if not isinstance(value, str):
                    raise TypeError
                return value
        except (TypeError, ValueError):
            self.fail(path, f"{'.'.join(map(str, path))}: expected {kind.__name__}, got {value!r}")
        return value

    def floats(self, path, value, n: Optional[int] = None) -> Tuple[float, ...]:
        if not isinstance(value, list) or (n is not None and len(value) != n):
            self.fail(path, f"{'.'.join(map(str, path))}: expected a list of {n or 'some'} numbers")
        return tuple(self.convert(list(path) + [i], v, float) for i, v in enumerate(value))

    def points(self, path) -> Tuple[Tuple[float, float], ...]:
        raw = self.get(path)
        if not isinstance(raw, list) or not raw:
            self.fail(path, f"{'.'.join(map(str, path))}: expected a non-empty list of [x, y] points")
        return tuple(self.floats(list(path) + [i], p, 2) for i, p in enumerate(raw))


def parse_world(text: str, source: str = "<world>") -> WorldSpec:
    d = _Doc(text, source)
    walls_raw = d.get(["walls"])
    if not isinstance(walls_raw, list) or not walls_raw:
        d.fail(["walls"], "walls: expected a non-empty list of [x1, y1, x2, y2]")
    walls = []
    for i, w in enumerate(walls_raw):
        seg = d.floats(["walls", i], w, 4)
        if seg[0] == seg[2] and seg[1] == seg[3]:
            d.fail(["walls", i], "zero-length wall segment")
        walls.append(seg)
    start = d.floats(["robot_start"], d.get(["robot_start"]), 3)
    drive = d.points(["drive_path"])
    peds = []
    raw = d.get(["pedestrians"], [])
    if not isinstance(raw, list):
        d.fail(["pedestrians"], "pedestrians: expected a list")
    for i in range(len(raw)):
        role = d.get(["pedestrians", i, "role"], kind=str)
        if role not in (LEADER, BYSTANDER):
            d.fail(["pedestrians", i, "role"], f"unknown role {role!r}; expected leader or bystander")
        speed = d.get(["pedestrians", i, "speed"], 0.8, float)
        if not 0 < speed <= 2.0:
            d.fail(["pedestrians", i, "speed"], "speed must lie in (0, 2] m/s")
        peds.append(PedestrianSpec(role, d.points(["pedestrians", i, "path"]),
                                   d.get(["pedestrians", i, "start_time"], 0.0, float), speed))
    name = d.get(["name"], os.path.splitext(os.path.basename(source))[0], str)
    ws = WorldSpec(name, tuple(walls), start, drive, tuple(peds), source)
    xs = [c for w in walls for c in (w[0], w[2])]
    ys = [c for w in walls for c in (w[1], w[3])]
    if not (min(xs) <= start[0] <= max(xs) and min(ys) <= start[1] <= max(ys)):
        d.fail(["robot_start"], "robot_start lies outside the walls' bounding box")
    return ws


def parse_scenario(text: str, source: str = "<scenario>", base_dir: Optional[str] = None) -> Scenario:
    d = _Doc(text, source)
    world_ref = d.get(["world"], kind=str)
    try:
        world = load_world(world_ref, base_dir)
    except FileNotFoundError:
        d.fail(["world"], f"world {world_ref!r} is neither a built-in nor a readable file")
    cond = d.get(["condition"], "two-people", str)
    if cond not in CONDITIONS:
        d.fail(["condition"], f"unknown condition {cond!r}; expected one of {', '.join(CONDITIONS)}")
    duration = d.get(["duration"], 60.0, float)
    if duration <= 0:
        d.fail(["duration"], "duration must be positive")
    noise_raw = d.get(["noise"], {})
    if not isinstance(noise_raw, dict):
        d.fail(["noise"], "noise: expected a mapping")
    nkw = {}
    for k in noise_raw:
        if k not in {f.name for f in dataclasses.fields(Noise)}:
            d.fail(["noise", k], f"unknown noise parameter {k!r}")
        nkw[k] = d.get(["noise", k], kind=float)
        if nkw[k] < 0:
            d.fail(["noise", k], f"{k} must be non-negative")
    overrides = {}
    for sect in ("follower", "tracker", "slam"):
        v = d.get([sect], {})
        if not isinstance(v, dict):
            d.fail([sect], f"{sect}: expected a mapping of overrides")
        overrides[sect] = v
    speed = d.get(["drive_speed"], 0.4, float)
    if speed <= 0:
        d.fail(["drive_speed"], "drive_speed must be positive")
    return Scenario(
        name=d.get(["name"], os.path.splitext(os.path.basename(source))[0], str),
        world=world, condition=cond, duration=duration, seed=d.get(["seed"], 1, int),
        filter_enabled=d.get(["filter_enabled"], True, bool), noise=Noise(**nkw), drive_speed=speed,
        follower=overrides["follower"], tracker=overrides["tracker"], slam=overrides["slam"], source=source)


# ---------------------------------------------------------------- built-ins


def _data_dir(kind: str):
    return resources.files("mapfollow") / "data" / kind


def builtin_names(kind: str) -> List[str]:
    return sorted(p.name[:-5] for p in _data_dir(kind).iterdir() if p.name.endswith(".yaml"))


def load_world(ref: str, base_dir: Optional[str] = None) -> WorldSpec:
    """Built-in world name or file path."""
    if ref in builtin_names("worlds"):
        res = _data_dir("worlds") / (ref + ".yaml")
        return parse_world(res.read_text(), f"worlds/{ref}.yaml")
    path = ref if base_dir is None or os.path.isabs(ref) else os.path.join(base_dir, ref)
    with open(path) as f:
        return parse_world(f.read(), path)


def load_scenario(ref: str) -> Scenario:
    """Built-in scenario name or file path."""
    if ref in builtin_names("scenarios"):
        res = _data_dir("scenarios") / (ref + ".yaml")
        return parse_scenario(res.read_text(), f"scenarios/{ref}.yaml")
    with open(ref) as f:
        return parse_scenario(f.read(), ref, os.path.dirname(os.path.abspath(ref)))
