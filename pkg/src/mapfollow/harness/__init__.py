"""Scenario files, the closed-loop runner, batch protocol and CLI."""
from .mapio import MapFormatError, load_map, save_map
from .runner import (RunAborted, RunResult, WaypointDriver, compare_maps, ground_truth_scenario, run_batch,
                     run_scenario, wall_ground_truth)
from .scenario import Scenario, ScenarioError, WorldSpec, load_scenario, load_world, parse_scenario, parse_world

__all__ = [
    "MapFormatError", "load_map", "save_map", "RunAborted", "RunResult", "WaypointDriver", "compare_maps",
    "ground_truth_scenario", "run_batch", "run_scenario", "wall_ground_truth", "Scenario", "ScenarioError",
    "WorldSpec", "load_scenario", "load_world", "parse_scenario", "parse_world",
]
