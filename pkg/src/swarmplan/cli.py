"""Command line entry point: ``swarmplan {plan,simulate,run,export}``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .export import (
    dump_json,
    plan_from_dict,
    plan_to_dict,
    read_trajectories_csv,
    render_svg,
    write_trajectories_csv,
)
from .pipeline import PlanBundle, PlanningFailedError, run_plan, run_sim
from .roadmap import GaussianRoadmap
from .scenario import ScenarioError, load_scenario

EXIT_OK, EXIT_VALIDATION, EXIT_PLANNING, EXIT_IO = 0, 2, 3, 4

ROADMAP_FILE = "roadmap.json"
PLAN_FILE = "transport.json"
TIMING_FILE = "timing.json"
TRAJ_FILE = "trajectories.csv"
METRICS_FILE = "metrics.json"
SVG_FILE = "plot.svg"


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swarmplan", description="Risk-aware swarm motion planning.")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb, help_text in [
        ("plan", "build the roadmap and the transport plan"),
        ("simulate", "run the robots along a saved plan"),
        ("run", "plan, then simulate"),
        ("export", "re-render the SVG from saved outputs"),
    ]:
        s = sub.add_parser(verb, help=help_text)
        s.add_argument("--scenario", required=True, help="scenario YAML file")
        s.add_argument("--out", required=True, help="output directory")
        s.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        s.add_argument("--threads", type=int, default=1, help="roadmap worker threads")
        s.add_argument("--svg", action=argparse.BooleanOptionalAction, default=True,
                       help="write plot.svg (default: on)")
    return p


def _save_plan(out: Path, bundle: PlanBundle) -> None:
    (out / ROADMAP_FILE).write_text(bundle.roadmap.dumps() + "\n")
    dump_json(out / PLAN_FILE, plan_to_dict(bundle.plan, bundle.trajectory))
    dump_json(out / TIMING_FILE, bundle.timing)


def _load_plan(out: Path) -> PlanBundle:
    try:
        graph = GaussianRoadmap.loads((out / ROADMAP_FILE).read_text())
        plan, traj = plan_from_dict(json.loads((out / PLAN_FILE).read_text()), graph)
    except (ValueError, KeyError, TypeError, IndexError) as exc:
        raise OSError(f"cannot read the saved plan in {out}: {exc}") from None
    return PlanBundle(graph, plan, traj, [], [])


def _run(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None and args.seed < 0:
        raise ScenarioError("--seed must be non-negative")
    if args.threads < 1:
        raise ScenarioError("--threads must be >= 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    bundle = robots = None
    if args.verb in ("plan", "run"):
        bundle = run_plan(scenario, args.seed, args.threads)
        _save_plan(out, bundle)
    if args.verb in ("simulate", "run"):
        if bundle is None:
            bundle = _load_plan(out)
        report = run_sim(scenario, bundle, args.seed)
        robots = report.result.trajectories
        write_trajectories_csv(out / TRAJ_FILE, robots)
        dump_json(out / METRICS_FILE, report.metrics)
        for line in report.result.events[:20]:
            print(line, file=sys.stderr)
    if args.verb == "export":
        bundle = _load_plan(out)
        if (out / TRAJ_FILE).exists():
            robots = read_trajectories_csv(out / TRAJ_FILE)
    if args.svg or args.verb == "export":
        (out / SVG_FILE).write_text(render_svg(scenario, bundle.roadmap, bundle.trajectory, robots))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _run(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except PlanningFailedError as exc:
        print(f"planning failed: {exc}", file=sys.stderr)
        return EXIT_PLANNING
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
