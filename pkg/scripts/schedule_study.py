"""Median sup-norm error against the limit for several learning-rate schedules.

Runs the bundled preset once per schedule and prints the error at a few
checkpoints, which shows how strongly the 1/n schedule is held back by the
early transient when the discount is close to one.

    python scripts/schedule_study.py --preset paper-stationary
"""

import argparse

from rasql.config import load_preset
from rasql.harness import compare, learn, solve_limit
from rasql.learner import LearningRateSchedule

SCHEDULES = ("inverse-visit", "polynomial:0.85", "polynomial:0.7", "polynomial:0.6")
CHECKPOINTS = (1_000, 10_000, 100_000)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--preset", default="paper-stationary")
    parser.add_argument("--seeds", type=int, default=25)
    parser.add_argument("--schedules", nargs="+", default=list(SCHEDULES))
    parser.add_argument("--workers", type=int)
    args = parser.parse_args()

    base = load_preset(args.preset).replace(seeds=tuple(range(args.seeds)))
    limit = solve_limit(base)
    tol = limit.default_tolerance()
    print(f"{args.preset}: tolerance {tol:.4f}")
    print(f"{'schedule':<18}" + "".join(f"{'t=' + str(t):>12}" for t in CHECKPOINTS) + "  verdict")
    for spec in args.schedules:
        cfg = base.replace(schedule=LearningRateSchedule.parse(spec))
        result = compare(limit.q, learn(cfg, args.workers), tol, CHECKPOINTS)
        cells = "".join(f"{result.trend.get(t, float('nan')):>12.4f}" for t in CHECKPOINTS)
        print(f"{spec:<18}{cells}  {'pass' if result.passed else 'fail'}")


if __name__ == "__main__":
    main()
