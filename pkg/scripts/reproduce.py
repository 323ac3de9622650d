"""Reproduce the four-state convergence experiment end to end.

Solves the theoretical limit, runs every seed, writes per-seed runs, the
aggregate quartile trace and a comparison verdict, then prints a short table.

    python scripts/reproduce.py --preset paper-stationary --out out/stationary
    python scripts/reproduce.py --preset paper-periodic --schedule polynomial:0.6
"""

import argparse
from pathlib import Path

import numpy as np

from rasql.config import load_config, load_preset
from rasql.csvio import read_run_csv
from rasql.harness import compare_command, learn_command, solve_limit_command
from rasql.learner import LearningRateSchedule


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    src = parser.add_mutually_exclusive_group()
    src.add_argument("--preset", default="paper-stationary")
    src.add_argument("--config", type=Path)
    parser.add_argument("--schedule", help="override the learning-rate schedule")
    parser.add_argument("--steps", type=int)
    parser.add_argument("--seeds", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--out", type=Path, default=Path("out"))
    args = parser.parse_args()

    cfg = load_config(args.config) if args.config else load_preset(args.preset)
    changes = {}
    if args.schedule:
        changes["schedule"] = LearningRateSchedule.parse(args.schedule)
    if args.steps:
        changes["steps"] = args.steps
    if args.seeds:
        changes["seeds"] = tuple(range(args.seeds))
    cfg = cfg.replace(**changes)

    limit = solve_limit_command(cfg, args.out)
    _, trace = learn_command(cfg, args.out, args.workers, limit)
    result = compare_command(limit.q, _records(args.out, cfg), None, args.out)

    np.set_printoptions(precision=5, suppress=True)
    print(f"config {cfg.name or args.config}  schedule {cfg.schedule.spec()}  "
          f"{len(cfg.seeds)} seeds x {cfg.steps} steps")
    for l in range(limit.period):
        print(f"phase {l}: limit\n{limit.q[l]}\n         median final\n{trace.median[-1, l]}")
    for t, err in result.trend.items():
        print(f"median sup error at t={t}: {err:.4f}")
    verdict = "PASS" if result.passed else "FAIL"
    print(f"{verdict}: median final error {result.median_error:.4f}, "
          f"tolerance {result.tolerance:.4f}; artifacts in {args.out}")


def _records(out_dir, cfg):
    return [read_run_csv(out_dir / "runs" / f"seed_{s}.csv") for s in cfg.seeds]


if __name__ == "__main__":
    main()
