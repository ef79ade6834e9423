import json
import math
import os

import numpy as np
import pytest
import yaml

from mapfollow.core import OccupancyGridMap, Pose2
from mapfollow.harness import cli
from mapfollow.harness.mapio import MapFormatError, load_map, map_to_image, read_pgm, save_map
from mapfollow.harness.runner import (RunAborted, WaypointDriver, compare_maps, ground_truth_scenario, run_batch,
                                      run_scenario)
from mapfollow.harness.scenario import (ScenarioError, builtin_names, load_scenario, load_world, parse_scenario,
                                        parse_world)

WORLD = """\
name: box
walls:
  - [0, 0, 6, 0]
  - [6, 0, 6, 4]
  - [6, 4, 0, 4]
  - [0, 4, 0, 0]
  - [3, 1.5, 3.5, 2]
robot_start: [1, 1, 0]
drive_path: [[5, 1], [5, 3]]
pedestrians:
  - role: leader
    path: [[2, 1], [5, 1]]
"""


@pytest.fixture(scope="module")
def gt_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("gt")
    sc = ground_truth_scenario(load_scenario("meeting_room_two_people")).with_(duration=8.0)
    run_scenario(sc, str(d))
    return str(d)


def test_builtins():
    assert builtin_names("worlds") == ["corridor", "meeting_room"]
    names = builtin_names("scenarios")
    assert len(names) == 6 and "corridor_two_people" in names
    sc = load_scenario("corridor_two_people")
    assert sc.condition == "two-people" and sc.duration == 60.0 and sc.seed == 1
    assert len(sc.world.build("two-people", 1).pedestrians) == 2
    assert len(sc.world.build("one-person", 1).pedestrians) == 1
    assert sc.world.build("no-people", 1).pedestrians == ()


def test_parse_world_ok():
    w = parse_world(WORLD, "box.yaml")
    assert w.name == "box" and len(w.walls) == 5 and w.robot_start == (1.0, 1.0, 0.0)


@pytest.mark.parametrize("text,line,fragment", [
    (WORLD.replace("  - [3, 1.5, 3.5, 2]", "  - [3, 1.5, 3.5]"), 7, "4"),
    (WORLD.replace("role: leader", "role: captain"), 11, "role"),
    (WORLD.replace("robot_start: [1, 1, 0]", "robot_start: [9, 1, 0]"), 8, "outside"),
    (WORLD.replace("  - [0, 4, 0, 0]", "  - [1, 1, 1, 1]"), 6, "zero-length"),
])
def test_world_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ScenarioError) as e:
        parse_world(text, "box.yaml")
    assert f"box.yaml:{line}:" in str(e.value) and fragment in str(e.value)


def test_scenario_errors(tmp_path):
    (tmp_path / "box.yaml").write_text(WORLD)
    good = "world: box.yaml\ncondition: one-person\nduration: 5\nseed: 3\n"
    sc = parse_scenario(good, "s.yaml", str(tmp_path))
    assert sc.world.name == "box" and sc.seed == 3
    for bad, line in [(good.replace("duration: 5", "duration: 0"), 3),
                      (good.replace("one-person", "crowd"), 2),
                      (good + "noise: {range_sigma: -1}\n", 5),
                      ("world: nowhere.yaml\n", 1),
                      (good.replace("duration: 5", "duration: 5: 3"), 3)]:
        with pytest.raises(ScenarioError) as e:
            parse_scenario(bad, "s.yaml", str(tmp_path))
        assert f"s.yaml:{line}:" in str(e.value)


def test_waypoint_driver_reaches_goal():
    d = WaypointDriver(((3.0, 0.0), (3.0, 2.0)), speed=0.4)
    from mapfollow.simulator import unicycle
    p = Pose2()
    for _ in range(40 * 30):
        v, w = d.command(p)
        p = unicycle(p, v, w, 0.025)
    assert math.hypot(p.x - 3.0, p.y - 2.0) < 0.6 and d.command(p) == (0.0, 0.0)


def test_map_roundtrip(tmp_path):
    g = OccupancyGridMap(0.02, 7, 5, Pose2(-0.05, 0.13, 0.0))
    g.cells[1, 2] = 3.0
    g.cells[4, 6] = 0.05
    g.cells[0, :3] = -2.0
    pgm, meta = save_map(g, str(tmp_path))
    img = read_pgm(pgm)
    assert img.shape == (5, 7) and img[-2, 2] == 0 and img[0, 6] == 205 and img[-1, 0] == 254
    with open(pgm, "rb") as f:
        assert f.read().startswith(b"P5\n7 5\n255\n")
    back = load_map(meta)
    assert back.resolution == 0.02 and (back.origin.x, back.origin.y) == (-0.05, 0.13)
    assert np.array_equal(map_to_image(back), map_to_image(g))
    assert np.array_equal(map_to_image(load_map(pgm)), img)


def test_map_corrupted(tmp_path):
    g = OccupancyGridMap(0.02, 4, 4, Pose2())
    g.cells[1, 1] = 1.0
    pgm, meta = save_map(g, str(tmp_path))
    data = open(pgm, "rb").read()
    open(pgm, "wb").write(data[:-3])
    with pytest.raises(MapFormatError):
        load_map(meta)
    open(pgm, "wb").write(b"P2" + data[2:])
    with pytest.raises(MapFormatError):
        load_map(meta)
    open(meta, "w").write("resolution: 0.02\n")
    with pytest.raises(MapFormatError):
        compare_maps(meta, meta)


def test_compare_maps_examples(gt_dir, tmp_path):
    meta = os.path.join(gt_dir, "map.yaml")
    rep = compare_maps(meta, meta, str(tmp_path / "r.json"))
    assert rep.adnn_mean == 0.0 and json.load(open(tmp_path / "r.json"))["adnn_mean"] == 0.0
    # shift the export by 0.3 m through its sidecar
    doc = yaml.safe_load(open(meta))
    doc["origin"][0] += 0.3
    doc["image"] = os.path.join(gt_dir, "map.pgm")
    shifted = tmp_path / "shifted.yaml"
    shifted.write_text(yaml.safe_dump(doc))
    assert compare_maps(str(shifted), meta).adnn_mean <= 0.02


def test_run_artifacts_and_determinism(tmp_path, gt_dir):
    sc = load_scenario("meeting_room_one_person").with_(duration=3.0)
    gt = load_map(os.path.join(gt_dir, "map.yaml"))
    a, b = tmp_path / "a", tmp_path / "b"
    run_scenario(sc, str(a), gt)
    run_scenario(sc, str(b), gt)
    expected = {"map.pgm", "map.yaml", "trajectory.csv", "tracker_trace.jsonl", "eval_report.json",
                "run_summary.json", "timing.json"}
    assert set(os.listdir(a)) == expected
    for name in expected - {"timing.json"}:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    rows = (a / "trajectory.csv").read_text().splitlines()
    assert len(rows) == 1 + 120
    rec = json.loads((a / "tracker_trace.jsonl").read_text().splitlines()[-1])
    assert rec["tick"] == 119


def test_run_rejects_zero_duration_and_aborts_outside():
    sc = load_scenario("corridor_no_people")
    with pytest.raises(ValueError):
        run_scenario(sc.with_(duration=0.0))
    w = parse_world(WORLD.replace("drive_path: [[5, 1], [5, 3]]", "drive_path: [[9, 1]]"), "box.yaml")
    with pytest.raises(RunAborted):
        run_scenario(sc.with_(world=w, duration=30.0, drive_speed=1.0))


def test_batch_partial_results(tmp_path):
    w = parse_world(WORLD, "box.yaml")
    sc = load_scenario("corridor_one_person").with_(world=w, duration=2.0, condition="one-person")
    summary = run_batch(sc, [1, 1], str(tmp_path), conditions=(True,))
    vals = [r["adnn_mean"] for r in summary["runs"]]
    assert len(vals) == 2 and vals[0] == vals[1]
    assert "filtered" in summary["conditions"] and (tmp_path / "comparison.txt").exists()
    bad = sc.with_(slam={"matcher": None, "resolution": "x"})
    summary = run_batch(bad, [1], None, conditions=(True,), gt_map=load_map(str(tmp_path / "ground_truth" /
                                                                                 "map.yaml")))
    assert summary["runs"][0]["error"] is not None and summary["conditions"] == {}


def test_cli_exit_codes(tmp_path, gt_dir, capsys):
    meta = os.path.join(gt_dir, "map.yaml")
    assert cli.main(["scenarios"]) == 0
    assert "corridor_two_people" in capsys.readouterr().out
    assert cli.main(["eval", meta, meta]) == 0
    assert json.loads(capsys.readouterr().out)["adnn_mean"] == 0.0
    bad = tmp_path / "bad.yaml"
    bad.write_text("world: corridor\nduration: -1\n")
    assert cli.main(["run", str(bad), "-o", str(tmp_path / "o")]) == 3
    assert "bad.yaml:2:" in capsys.readouterr().err
    assert cli.main(["run", "no_such_scenario", "-o", str(tmp_path / "o")]) == 3
    empty = tmp_path / "e"
    empty.mkdir()
    g = OccupancyGridMap(0.02, 3, 3, Pose2())
    save_map(g, str(empty))
    assert cli.main(["eval", str(empty / "map.yaml"), meta]) == 5
    (tmp_path / "junk.yaml").write_text("image: nothing.pgm\nresolution: 0.02\norigin: [0, 0, 0]\n")
    assert cli.main(["eval", str(tmp_path / "junk.yaml"), meta]) == 5
    out = tmp_path / "run"
    assert cli.main(["run", "meeting_room_one_person", "-o", str(out), "--duration", "1", "--seed", "4",
                     "--filter", "off", "--ground-truth", meta]) == 0
    summary = json.load(open(out / "run_summary.json"))
    assert summary["seed"] == 4 and summary["filter_enabled"] is False
    with pytest.raises(SystemExit) as e:
        cli.main(["batch", "corridor_two_people", "--repeats", "0"])
    assert e.value.code == 2
