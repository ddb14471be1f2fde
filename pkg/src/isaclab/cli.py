"""Command line entry point: ``isaclab run | oracle | validate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import jsonschema

from .constellations import ConstellationError, InfeasibleSubcarrierError
from .harness.runner import run_experiment
from .harness.scenario import ScenarioError, load_blob, validate_blob
from .optimizer import InfeasibleProblemError, exhaustive_oracle
from .optimizer.instance import load_instance, plan_to_dict

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_SCHEMA = 3


def _report(diags) -> None:
    for d in diags:
        print(f"error: {d}", file=sys.stderr)


def cmd_run(args) -> int:
    try:
        manifest = run_experiment(args.scenario, args.out, seed=args.seed, trials=args.trials,
                                  threads=args.threads)
    except ScenarioError as exc:
        _report(exc.diagnostics)
        return EXIT_SCHEMA
    for a in manifest["artifacts"]:
        print(f"wrote {args.out}/{a['file']} ({a['rows']} rows)")
    if manifest["status"] == "infeasible":
        print(f"{len(manifest['infeasible'])} sweep points infeasible; see manifest.json",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        diags = validate_blob(load_blob(args.scenario))
    except ScenarioError as exc:
        diags = exc.diagnostics
    if diags:
        _report(diags)
        return EXIT_SCHEMA
    print(f"{args.scenario}: ok")
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        inst = load_instance(args.instance)
    except (jsonschema.ValidationError, ConstellationError, json.JSONDecodeError) as exc:
        print(f"error: {getattr(exc, 'message', exc)}", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        plan = exhaustive_oracle(inst.chain, inst.channel_gains, inst.classes, inst.r_min,
                                 inst.p_ave, **inst.kwargs())
    except (InfeasibleProblemError, InfeasibleSubcarrierError) as exc:
        print(json.dumps({"status": "infeasible", "reason": str(exc)}))
        return EXIT_INFEASIBLE
    print(json.dumps({"status": "ok", "solution": plan_to_dict(plan)}, indent=1))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isaclab", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario and write CSV artifacts")
    r.add_argument("scenario")
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--trials", type=int)
    r.add_argument("--threads", type=int, default=1)
    r.set_defaults(func=cmd_run)
    o = sub.add_parser("oracle", help="solve a small subcarrier instance exhaustively")
    o.add_argument("instance")
    o.set_defaults(func=cmd_oracle)
    v = sub.add_parser("validate", help="check a scenario file against the schema")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
