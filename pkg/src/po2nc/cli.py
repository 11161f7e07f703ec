"""Command line entry point: ``po2nc run | compare | plan``.

Exit codes: 0 success, 2 infeasible plan, 3 IO error.
"""
from __future__ import annotations

import argparse
import json
import sys

from .harness import ExperimentConfig, _parse_rho, compare_oracles, run_experiment
from .o2nc import ORACLE_KINDS, PlanInfeasible, plan_run

EXIT_INFEASIBLE = 2
EXIT_IO = 3


def _parser():
    parser = argparse.ArgumentParser(prog="po2nc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, help="run this single replicate seed")
    run.add_argument("--oracle", choices=ORACLE_KINDS)
    run.add_argument("--out", help="output directory")

    cmp_ = sub.add_parser("compare", help="tree vs naive oracle on matched seeds")
    cmp_.add_argument("--config", required=True)
    cmp_.add_argument("--out", required=True)

    plan = sub.add_parser("plan", help="print the resolved run plan as JSON")
    plan.add_argument("--d", type=int, required=True)
    plan.add_argument("--delta", type=float, required=True)
    plan.add_argument("--L", type=float, required=True)
    plan.add_argument("--fstar", type=float, required=True)
    plan.add_argument("--M", type=int, required=True)
    plan.add_argument("--rho", default=None, help="privacy scale; omit for non-private")
    plan.add_argument("--oracle", choices=ORACLE_KINDS, default="tree")
    plan.add_argument("--seed", type=int, default=0)
    return parser


def _load_config(args):
    overrides = {"out_dir": args.out}
    if getattr(args, "oracle", None):
        overrides["oracle_kind"] = args.oracle
    if getattr(args, "seed", None) is not None:
        overrides["seeds"] = [args.seed]
    return ExperimentConfig.from_json(args.config, **overrides)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "plan":
            plan = plan_run(args.d, args.delta, args.L, args.fstar, args.M,
                            _parse_rho(args.rho), seed=args.seed, oracle_kind=args.oracle)
            print(json.dumps(plan.to_dict(), indent=2, sort_keys=True))
        elif args.command == "run":
            config = _load_config(args)
            run_experiment(config)
            print(f"wrote results to {config.out_dir}")
        else:
            config = _load_config(args)
            report, _ = compare_oracles(config)
            print(json.dumps(report, indent=2, sort_keys=True))
    except PlanInfeasible as exc:
        print(f"infeasible plan: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"IO error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
