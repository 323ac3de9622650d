"""Command-line front end.

Exit codes: 0 success, 1 other error, 2 assumption violation (non-ergodic
chain or unvisited agent-state/action pair), 3 comparison failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import csvio, harness
from .config import ExperimentConfig, list_presets, load_config, load_preset
from .learner import LearningRateSchedule
from .occupancy import AssumptionError
from .policies import PeriodicPolicy, greedy_policy, uniform_policy

log = logging.getLogger("rasql")

EXIT_OK, EXIT_ERROR, EXIT_ASSUMPTION, EXIT_COMPARE = 0, 1, 2, 3


def _add_config_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="experiment config file (JSON)")
    src.add_argument("--preset", help="bundled experiment preset name")
    p.add_argument("--allow-partial", action="store_true",
                   help="tolerate agent-state/action pairs with zero limiting mass")
    p.add_argument("--out", type=Path, help="output directory")


def _add_run_args(p: argparse.ArgumentParser) -> None:
    seeds = p.add_mutually_exclusive_group()
    seeds.add_argument("--seeds", type=int, help="use seeds 0..N-1")
    seeds.add_argument("--seed-list", help="comma-separated seeds")
    p.add_argument("--steps", type=int)
    p.add_argument("--schedule", help="inverse-visit | polynomial:OMEGA | constant:C")
    p.add_argument("--log-every", type=int)
    p.add_argument("--workers", type=int, help=f"worker processes (default ${harness.WORKERS_ENV} "
                                               "or CPU count)")


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else load_preset(args.preset)
    changes = {}
    if args.allow_partial:
        changes["allow_partial"] = True
    if getattr(args, "seeds", None) is not None:
        changes["seeds"] = tuple(range(args.seeds))
    if getattr(args, "seed_list", None):
        changes["seeds"] = tuple(int(s) for s in args.seed_list.split(","))
    if getattr(args, "steps", None) is not None:
        changes["steps"] = args.steps
    if getattr(args, "schedule", None):
        changes["schedule"] = LearningRateSchedule.parse(args.schedule)
    if getattr(args, "log_every", None) is not None:
        changes["log_every"] = args.log_every
    return cfg.replace(**changes) if changes else cfg


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_solve_limit(args) -> int:
    cfg = _config(args)
    report = harness.solve_limit_command(cfg, args.out)
    _print({"q_limit": report.q.tolist(), **report.summary()})
    return EXIT_OK


def cmd_learn(args) -> int:
    cfg = _config(args)
    _, trace = harness.learn_command(cfg, args.out, args.workers)
    _print({"seeds": len(trace.seeds), "steps": cfg.steps, "schedule": cfg.schedule.spec(),
            "final_sup_error": trace.final_errors,
            "final_median": trace.median[-1].tolist()})
    return EXIT_OK


def cmd_compare(args) -> int:
    limit = csvio.read_q_csv(args.limit)
    files = sorted(Path(args.runs).glob("*.csv"))
    if not files:
        raise FileNotFoundError(f"no run CSV files in {args.runs}")
    records = sorted((csvio.read_run_csv(f) for f in files), key=lambda r: r.seed)
    result = harness.compare_command(limit, records, args.tolerance, args.out)
    _print(result.to_dict())
    return EXIT_OK if result.passed else EXIT_COMPARE


def cmd_eval_return(args) -> int:
    cfg = _config(args)
    if args.policy == "behavior":
        policy = cfg.behavior
    elif args.policy == "uniform":
        policy = uniform_policy(cfg.agent_state.num_agent_states, cfg.model.num_actions)
    else:
        report = harness.solve_limit(cfg)
        if report.period == 1:
            policy = greedy_policy(report.q[0], cfg.regularizer)
        else:
            policy = PeriodicPolicy(tuple(greedy_policy(q, cfg.regularizer) for q in report.q))
    est = harness.evaluate_return(cfg.model, cfg.agent_state, policy, cfg.regularizer,
                                  range(args.episodes), args.horizon)
    _print({"policy": args.policy, **est.to_dict()})
    return EXIT_OK


def cmd_preset_list(args) -> int:
    for name in list_presets():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rasql", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-limit", help="compute the theoretical limit Q-table(s)")
    _add_config_args(p)
    p.set_defaults(func=cmd_solve_limit)

    p = sub.add_parser("learn", help="run the learner for every seed and aggregate")
    _add_config_args(p)
    _add_run_args(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("compare", help="compare run artifacts against a limit table")
    p.add_argument("--limit", type=Path, required=True, help="q_limit.csv")
    p.add_argument("--runs", type=Path, required=True, help="directory of run CSV files")
    p.add_argument("--tolerance", type=float,
                   help="sup-norm tolerance (default 0.05 * (1 + max |Q_limit|))")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("eval-return", help="Monte-Carlo discounted return of a policy")
    _add_config_args(p)
    p.add_argument("--policy", choices=["greedy", "behavior", "uniform"], default="greedy")
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--horizon", type=int)
    p.set_defaults(func=cmd_eval_return)

    p = sub.add_parser("preset-list", help="list bundled presets")
    p.set_defaults(func=cmd_preset_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except AssumptionError as err:
        print(f"assumption violated: {err}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except Exception as err:  # noqa: BLE001 - CLI boundary
        log.debug("failure", exc_info=True)
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
