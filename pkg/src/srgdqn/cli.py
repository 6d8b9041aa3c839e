"""Command line entry point.

Examples::

    srgdqn run --task mountaincar --algo svrg --algo sarah_adam --seeds 0-9 --budget 20000
    srgdqn exact-anchor --task mountaincar --seeds 0-4 --budget 20000 --out results
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config, parse_seeds
from .env import TASKS
from .experiment import run_exact_anchor, run_experiment
from .optim import OPTIMIZERS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="srgdqn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--task", choices=TASKS)
        p.add_argument("--seeds", help="e.g. 0-9 or 1,4,7")
        p.add_argument("--config", help="key = value file; missing keys use the task defaults")
        p.add_argument("--out", help="output directory (default: results)")
        p.add_argument("--budget", type=int, help="override the step/episode budget")
        p.add_argument("--quiet", action="store_true")

    run = sub.add_parser("run", help="multi-seed sweep of one task")
    common(run)
    run.add_argument("--algo", action="append", choices=OPTIMIZERS,
                     help="optimizer id; repeat for several (default: all four)")
    run.add_argument("--jobs", type=int, default=1, help="cells run in parallel")

    exact = sub.add_parser("exact-anchor", help="SVRG with batch vs exact anchors, replayed offline")
    common(exact)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        spec = load_config(args.config, task=args.task)
        if args.seeds:
            spec.seeds = parse_seeds(args.seeds)
        if args.out:
            spec.out = type(spec.out)(args.out)
        if args.budget is not None:
            spec.overrides["budget"] = args.budget
        if getattr(args, "algo", None):
            spec.algos = list(args.algo)
        spec.__post_init__()
        spec.task_config(spec.seeds[0])
    except (ConfigError, OSError) as exc:
        print(f"srgdqn: {exc}", file=sys.stderr)
        return 2

    if args.command == "run":
        return run_experiment(spec, jobs=args.jobs)
    return run_exact_anchor(spec)


if __name__ == "__main__":
    sys.exit(main())
