"""Experiment pipeline: theoretical limits, multi-seed learning, comparison, returns."""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import csvio
from .agent_state import AgentStateMachine
from .config import ExperimentConfig
from .learner import RunRecord, _run
from .occupancy import JointDistribution, periodic_stationary
from .policies import PeriodicPolicy, Policy, as_periodic
from .pomdp import PomdpModel, sample_initial, sample_initial_obs
from .regularizers import Regularizer
from .rng import RngStream, pick
from .solver import (InducedMdp, build_periodic_induced, contraction_factor,
                     solve_periodic_fixed_point)

log = logging.getLogger(__name__)

WORKERS_ENV = "RASQL_WORKERS"
CHECKPOINTS = (1_000, 10_000, 100_000)


class ComparisonFailed(RuntimeError):
    pass


@dataclass
class LimitReport:
    """Predicted limit of the learner plus diagnostics."""

    q: np.ndarray  # (L, Z, A)
    zetas: list[JointDistribution]
    mdps: list[InducedMdp]
    contraction: float
    discount: float

    @property
    def period(self) -> int:
        return self.q.shape[0]

    @property
    def residual(self) -> float:
        return max(z.residual for z in self.zetas)

    @property
    def partial(self) -> bool:
        return any(m.partial for m in self.mdps)

    def default_tolerance(self) -> float:
        return 0.05 * (1.0 + float(np.abs(self.q).max()))

    def summary(self) -> dict:
        return {
            "period": self.period,
            "stationarity_residual": self.residual,
            "solver": [z.method for z in self.zetas],
            "support": [m.mask.astype(int).tolist() for m in self.mdps],
            "partial": self.partial,
            "contraction_factor": self.contraction,
            "contraction_bound": self.discount ** self.period,
            "q_sup_norm": float(np.abs(self.q).max()),
        }


def solve_limit(config: ExperimentConfig) -> LimitReport:
    """Limiting distribution(s), induced MDP(s) and regularized fixed point(s)."""
    zetas = periodic_stationary(config.model, config.agent_state, config.behavior,
                                allow_partial=config.allow_partial)
    mdps = build_periodic_induced(config.model, config.agent_state, zetas)
    qs = solve_periodic_fixed_point(mdps, config.regularizer)
    factor = contraction_factor(mdps, config.regularizer)
    return LimitReport(np.stack(qs), zetas, mdps, factor, config.model.discount)


def solve_limit_command(config: ExperimentConfig, out_dir: Path | None = None) -> LimitReport:
    report = solve_limit(config)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        meta = {"config_digest": config.digest(), "partial": report.partial}
        csvio.write_q_csv(out_dir / "q_limit.csv", report.q, meta)
        for l, zeta in enumerate(report.zetas):
            csvio.write_distribution_csv(out_dir / f"zeta_phase{l}.csv", zeta.mass,
                                         {"phase": l, "residual": repr(zeta.residual)})
        _write_json(out_dir / "limit_summary.json", report.summary())
    return report


@dataclass
class AggregateTrace:
    """Quartiles across seeds on a common snapshot grid; arrays are ``(K, L, Z, A)``."""

    seeds: tuple[int, ...]
    times: np.ndarray
    median: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    limit: np.ndarray | None = None
    final_errors: dict = field(default_factory=dict)


def aggregate(records: list[RunRecord], limit: np.ndarray | None = None) -> AggregateTrace:
    times = records[0].times
    for rec in records[1:]:
        if not np.array_equal(rec.times, times):
            raise ValueError(f"seed {rec.seed} was logged on a different time grid")
    stack = np.stack([rec.snapshots for rec in records])  # (seeds, K, L, Z, A)
    lower, median, upper = np.percentile(stack, [25, 50, 75], axis=0)
    trace = AggregateTrace(tuple(r.seed for r in records), times, median, lower, upper, limit)
    if limit is not None:
        errs = sup_errors(records, limit)
        q25, q50, q75 = np.percentile(errs, [25, 50, 75])
        trace.final_errors = {"median": float(q50), "iqr": [float(q25), float(q75)]}
    return trace


def _worker_count(requested: int | None, jobs: int) -> int:
    if requested is None:
        env = os.environ.get(WORKERS_ENV)
        requested = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(requested, jobs))


def _one_run(args) -> RunRecord:
    config, seed, digest = args
    return _run(config.model, config.agent_state, config.behavior, config.regularizer,
                config.schedule, config.steps, seed, config.log_every,
                allow_noncompliant=False, digest=digest)


def learn(config: ExperimentConfig, workers: int | None = None) -> list[RunRecord]:
    """One learning run per seed; results come back in seed-list order."""
    digest = config.digest()
    jobs = [(config, seed, digest) for seed in config.seeds]
    n = _worker_count(workers, len(jobs))
    if n == 1:
        return [_one_run(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_one_run, jobs))


def learn_command(config: ExperimentConfig, out_dir: Path | None = None,
                  workers: int | None = None, limit: LimitReport | None = None
                  ) -> tuple[list[RunRecord], AggregateTrace]:
    """Runs every seed, aggregates quartiles against the limit and writes artifacts."""
    if limit is None:
        limit = solve_limit(config)
    records = learn(config, workers)
    trace = aggregate(records, limit.q)
    if out_dir is not None:
        out_dir = Path(out_dir)
        runs = out_dir / "runs"
        runs.mkdir(parents=True, exist_ok=True)
        for rec in records:
            csvio.write_run_csv(runs / f"seed_{rec.seed}.csv", rec)
        digest = config.digest()
        csvio.write_trace_csv(out_dir / "trace.csv", trace,
                              {"config_digest": digest, "schedule": config.schedule.spec()})
        csvio.write_q_csv(out_dir / "q_limit.csv", limit.q, {"config_digest": digest})
        summary = {"config_digest": digest, "schedule": config.schedule.spec(),
                   "steps": config.steps, "seeds": list(config.seeds),
                   "final_sup_error": trace.final_errors, "limit": limit.summary()}
        _write_json(out_dir / "summary.json", summary)
    return records, trace


def sup_errors(records: list[RunRecord], limit: np.ndarray, t: int | None = None) -> np.ndarray:
    """Per-seed ``max_l |Q^l - limit^l|_inf`` at the last snapshot at or before ``t``."""
    out = []
    for rec in records:
        if rec.final.shape != limit.shape:
            raise ValueError(f"run shape {rec.final.shape} does not match limit {limit.shape}")
        if t is None:
            q = rec.final
        else:
            k = np.searchsorted(rec.times, t, side="right") - 1
            if k < 0:
                raise ValueError(f"no snapshot at or before t={t}")
            q = rec.snapshots[k]
        out.append(np.abs(q - limit).max())
    return np.array(out)


@dataclass
class Comparison:
    passed: bool
    tolerance: float
    median_error: float
    per_phase_median: list[float]
    per_seed_error: dict
    trend: dict
    trend_decreasing: bool

    def to_dict(self) -> dict:
        return {"passed": self.passed, "tolerance": self.tolerance,
                "median_error": self.median_error, "per_phase_median": self.per_phase_median,
                "per_seed_error": self.per_seed_error, "trend": self.trend,
                "trend_decreasing": self.trend_decreasing}


def compare(limit: np.ndarray, records: list[RunRecord], tolerance: float,
            checkpoints=CHECKPOINTS) -> Comparison:
    """Median over seeds of the final sup-norm error, against ``tolerance``.

    The trend check requires the median error to drop strictly across the
    checkpoints the runs reach; it is reported but does not decide the verdict.
    """
    limit = np.asarray(limit, dtype=float)
    errs = sup_errors(records, limit)
    median = float(np.median(errs))
    per_phase = [float(np.median([np.abs(r.final[l] - limit[l]).max() for r in records]))
                 for l in range(limit.shape[0])]
    last = min(int(r.times[-1]) for r in records)
    trend = {int(t): float(np.median(sup_errors(records, limit, t)))
             for t in checkpoints if t <= last}
    vals = list(trend.values())
    decreasing = len(vals) >= 2 and all(b < a for a, b in zip(vals, vals[1:]))
    return Comparison(median <= tolerance, float(tolerance), median, per_phase,
                      {int(r.seed): float(e) for r, e in zip(records, errs)}, trend, decreasing)


def compare_command(limit: np.ndarray, records: list[RunRecord], tolerance: float | None = None,
                    out_dir: Path | None = None) -> Comparison:
    if tolerance is None:
        tolerance = 0.05 * (1.0 + float(np.abs(limit).max()))
    result = compare(limit, records, tolerance)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        _write_json(Path(out_dir) / "compare.json", result.to_dict())
    return result


@dataclass
class ReturnEstimate:
    """Monte-Carlo discounted returns with and without the regularization penalty."""

    j: float
    j_se: float
    j_reg: float
    j_reg_se: float
    horizon: int
    truncation_bound: float
    episodes: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def horizon_for(gamma: float, span: float, eps: float = 1e-6) -> int:
    """Smallest ``H`` with ``gamma**H * span / (1 - gamma) <= eps``."""
    if gamma == 0.0 or span == 0.0:
        return 1
    return max(1, math.ceil(math.log(eps * (1 - gamma) / span) / math.log(gamma)))


def evaluate_return(model: PomdpModel, asm: AgentStateMachine, policy: Policy | PeriodicPolicy,
                    reg: Regularizer, seeds, horizon: int | None = None) -> ReturnEstimate:
    """Discounted return of an agent-state policy on the true POMDP, one episode per seed.

    The regularized return subtracts ``reg.omega(pi(.|z_t))`` at every step.
    """
    ppol = as_periodic(policy)
    L = ppol.period
    gamma = model.discount
    penalties = [reg.omega(p.probs).tolist() for p in ppol.phases]
    span = float(np.abs(model.reward).max()) + max(abs(x) for row in penalties for x in row)
    if horizon is None:
        horizon = horizon_for(gamma, span)
    bound = gamma ** horizon * span / (1 - gamma)
    reward = model.reward.tolist()
    kcdf = model._kernel_cdfs
    pcdf = [p.cdfs for p in ppol.phases]
    phi = asm.update_table.tolist()
    Y = model.num_obs
    js, jrs = [], []
    for seed in seeds:
        rng = RngStream(seed)
        uniform = rng.uniform
        s = sample_initial(model, rng)
        z = asm.start(sample_initial_obs(model, s, rng))
        j = jr = 0.0
        disc = 1.0
        for t in range(horizon):
            ell = t % L
            a = pick(pcdf[ell][z], uniform())
            r = reward[s][a]
            j += disc * r
            jr += disc * (r - penalties[ell][z])
            s, y = divmod(pick(kcdf[s][a], uniform()), Y)
            z = phi[z][y][a]
            disc *= gamma
        js.append(j)
        jrs.append(jr)
    n = len(js)

    def se(xs):
        return float(np.std(xs, ddof=1) / math.sqrt(n)) if n > 1 else 0.0

    return ReturnEstimate(float(np.mean(js)), se(js), float(np.mean(jrs)), se(jrs),
                          horizon, bound, n)


def _write_json(path: Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
