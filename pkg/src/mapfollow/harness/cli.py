"""``mapfollow`` command line: run, batch, eval, scenarios."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import List, Optional

from .mapio import MapFormatError
from .runner import RunAborted, compare_maps, run_batch, run_scenario
from .scenario import ScenarioError, builtin_names, load_scenario

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_RUNTIME = 4
EXIT_EVAL = 5

log = logging.getLogger("mapfollow")


def _scenario(args):
    sc = load_scenario(args.scenario)
    if args.seed is not None:
        sc = sc.with_(seed=args.seed)
    if args.filter is not None:
        sc = sc.with_(filter_enabled=args.filter == "on")
    if getattr(args, "duration", None) is not None:
        sc = sc.with_(duration=args.duration)
    return sc


def cmd_run(args) -> int:
    sc = _scenario(args)
    gt = None
    if args.ground_truth:
        from .mapio import load_map
        gt = load_map(args.ground_truth)
    log.info("running %s (%s, seed %d, filter %s)", sc.name, sc.condition, sc.seed,
             "on" if sc.filter_enabled else "off")
    res = run_scenario(sc, args.output, gt)
    errs = res.trajectory_errors()
    log.info("done in %.1f s; max trajectory error %.4f m", res.wall_time, errs.max())
    if res.report is not None:
        print(json.dumps(res.report.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_batch(args) -> int:
    sc = _scenario(args)
    seeds = args.seeds if args.seeds else list(range(1, args.repeats + 1))

    def show(row):
        state = "failed: " + row["error"] if row["error"] else f"ADNN {row['adnn_mean']:.4f} m"
        log.info("seed %d filter %s: %s", row["seed"], "on" if row["filter"] else "off", state)

    conditions = (True, False) if args.filter is None else (args.filter == "on",)
    summary = run_batch(sc, seeds, args.output, conditions, log=show)
    from .runner import comparison_table
    sys.stdout.write(comparison_table(summary))
    failed = [r for r in summary["runs"] if r["error"]]
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_eval(args) -> int:
    report = compare_maps(args.estimate, args.ground_truth, args.report)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_scenarios(args) -> int:
    for name in builtin_names("scenarios"):
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mapfollow", description="Person-following SLAM simulation harness.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required: bool):
        sp.add_argument("scenario", help="built-in scenario name or scenario file")
        sp.add_argument("-o", "--output", required=out_required, help="output directory")
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        sp.add_argument("--filter", choices=("on", "off"), help="override people filtering")

    r = sub.add_parser("run", help="run one scenario and write its artifacts")
    common(r, True)
    r.add_argument("--duration", type=float, help="override the duration [s]")
    r.add_argument("--ground-truth", help="map sidecar (.yaml) to evaluate against")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("batch", help="ground-truth run plus filtered/unfiltered repeats")
    common(b, False)
    b.add_argument("--duration", type=float, help="override the duration [s]")
    b.add_argument("--repeats", type=int, default=5, help="number of seeds 1..N (default 5)")
    b.add_argument("--seeds", type=int, nargs="+", help="explicit seed list")
    b.set_defaults(func=cmd_batch)

    e = sub.add_parser("eval", help="register two exported maps and report ADNN")
    e.add_argument("estimate", help="estimated map (.yaml sidecar or .pgm)")
    e.add_argument("ground_truth", help="ground-truth map (.yaml sidecar or .pgm)")
    e.add_argument("--report", help="write the report JSON here")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("scenarios", help="list built-in scenarios")
    s.set_defaults(func=cmd_scenarios)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2) if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "repeats", 1) < 1:
        parser.error("--repeats must be at least 1")
    try:
        return args.func(args)
    except (ScenarioError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except MapFormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_EVAL
    except ValueError as e:
        code = EXIT_EVAL if args.command == "eval" else EXIT_RUNTIME
        print(f"error: {e}", file=sys.stderr)
        return code
    except RunAborted as e:
        print(f"error: run aborted: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
