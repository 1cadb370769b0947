"""Command-line entry point: ``tailsitter {plan,track,compare,validate}``.

Exit codes: 0 success, 2 scenario validation error, 3 planner failure,
4 tracking divergence.
"""

import argparse
import json
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .errors import DivergenceError, ValidationError
from .pipeline import PlannerFailure, run_compare, run_plan, run_track
from .scenario import load_scenario

EXIT_OK, EXIT_VALIDATION, EXIT_PLANNER, EXIT_DIVERGENCE = 0, 2, 3, 4

_RUNNERS = {"plan": run_plan, "track": run_track, "compare": run_compare}


def build_parser():
    p = argparse.ArgumentParser(prog="tailsitter", description="Tail-sitter trajectory planning and tracking.")
    p.add_argument("verb", choices=["plan", "track", "compare", "validate"])
    p.add_argument("--scenario", action="append", required=True, metavar="PATH",
                   help="scenario JSON file (repeat to run several)")
    p.add_argument("--out", default="out", metavar="DIR", help="output directory (default: out)")
    p.add_argument("--seed", type=int, default=0, help="seed recorded with the run; all runs are deterministic")
    p.add_argument("--jobs", type=int, default=1, help="scenarios run in parallel (default 1)")
    p.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    return p


def run_one(verb, scenario_path, out_dir, seed=0, figures=True):
    """Run one verb on one scenario file; returns (exit code, message)."""
    np.random.seed(seed)
    try:
        sc = load_scenario(scenario_path)
    except ValidationError as exc:
        return EXIT_VALIDATION, f"validation error in {scenario_path}: {exc}"
    if verb == "validate":
        return EXIT_OK, f"{scenario_path}: ok ({len(sc.waypoints)} waypoints)"
    try:
        summary = _RUNNERS[verb](sc, out_dir, figures)
    except ValidationError as exc:
        return EXIT_VALIDATION, f"validation error in {scenario_path}: {exc}"
    except PlannerFailure as exc:
        return EXIT_PLANNER, f"planner failure for {sc.name}: {exc}\n{json.dumps(exc.diagnostics, default=str)}"
    except DivergenceError as exc:
        return EXIT_DIVERGENCE, f"tracking diverged for {sc.name}: {exc} (partial logs in {out_dir})"
    return EXIT_OK, _headline(verb, sc.name, summary, out_dir)


def _headline(verb, name, s, out_dir):
    if verb == "plan":
        body = f"duration {s['duration_s']:.3f} s, max speed {s['max_sampled_speed_mps']:.3f} m/s"
    elif verb == "track":
        body = (f"max error {s['max_position_error_m']:.4f} m, rms {s['rms_position_error_m']:.4f} m, "
                f"bound violations {s['input_bound_violations']}")
    else:
        body = ", ".join(f"{k} {m['duration_s']:.3f} s" for k, m in s["methods"].items())
    return f"{verb} {name}: {body} -> {out_dir}"


def _out_dirs(paths, out):
    if len(paths) == 1:
        return [Path(out)]
    stems = [Path(p).stem for p in paths]
    return [Path(out) / (s if stems.count(s) == 1 else f"{s}_{i}") for i, s in enumerate(stems)]


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("--jobs must be at least 1", file=sys.stderr)
        return EXIT_VALIDATION
    outs = _out_dirs(args.scenario, args.out)
    jobs = [(args.verb, p, str(o), args.seed, not args.no_figures) for p, o in zip(args.scenario, outs)]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_safe_run, jobs))
    else:
        results = [_safe_run(j) for j in jobs]
    code = EXIT_OK
    for rc, msg in results:
        print(msg, file=sys.stdout if rc == EXIT_OK else sys.stderr)
        code = max(code, rc)
    return code


def _safe_run(job):
    try:
        return run_one(*job)
    except Exception:  # keep sibling jobs alive; report the traceback
        return 1, traceback.format_exc()


if __name__ == "__main__":
    sys.exit(main())
