"""Off-policy regularized agent-state Q-learning loops.

All three learners share one loop. With period ``L`` the loop keeps ``L``
tables; the step at time ``t`` (phase ``l = (t - 1) mod L``) updates table
``l`` at the visited ``(z_t, a_t)`` and bootstraps from table ``l + 1``:

    Q^l(z, a) += alpha * (r + gamma * conj(Q^(l+1)(z', .)) - Q^l(z, a))

``conj`` is the regularizer's convex conjugate; the unregularized learner
uses the max. The step size depends on the visit count of ``(l, z, a)`` only.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .agent_state import AgentStateMachine
from .policies import PeriodicPolicy, Policy, as_periodic
from .pomdp import PomdpModel, sample_initial, sample_initial_obs
from .regularizers import Regularizer, Unregularized
from .rng import RngStream, pick

SNAPSHOTS_PER_RUN = 200


@dataclass(frozen=True)
class LearningRateSchedule:
    """Step size as a function of the visit count ``n >= 1``.

    ``inverse-visit`` is 1/n, ``polynomial`` is 1/n**omega with omega in
    (0.5, 1], ``constant`` is c. Only the first two satisfy the
    Robbins-Monro conditions.
    """

    kind: str = "inverse-visit"
    omega: float = 1.0
    c: float = 0.1

    def __post_init__(self):
        if self.kind not in ("inverse-visit", "polynomial", "constant"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "polynomial" and not 0.5 < self.omega <= 1.0:
            raise ValueError(f"polynomial exponent must lie in (0.5, 1], got {self.omega}")
        if self.kind == "constant" and not 0.0 < self.c <= 1.0:
            raise ValueError(f"constant step must lie in (0, 1], got {self.c}")

    @property
    def compliant(self) -> bool:
        return self.kind != "constant"

    def rate(self, n: int) -> float:
        if self.kind == "inverse-visit":
            return 1.0 / n
        if self.kind == "polynomial":
            return n ** -self.omega
        return self.c

    def spec(self) -> str:
        if self.kind == "polynomial":
            return f"polynomial:{self.omega!r}"
        if self.kind == "constant":
            return f"constant:{self.c!r}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> LearningRateSchedule:
        """Parse ``inverse-visit``, ``polynomial:OMEGA`` or ``constant:C``."""
        kind, _, arg = text.strip().partition(":")
        kind = {"inverse": "inverse-visit", "poly": "polynomial", "const": "constant"}.get(kind, kind)
        if kind == "polynomial":
            return cls(kind, omega=float(arg or 0.85))
        if kind == "constant":
            return cls(kind, c=float(arg or 0.1))
        if arg:
            raise ValueError(f"schedule {kind!r} takes no parameter")
        return cls(kind)


@dataclass
class RunRecord:
    """Trace of one learning run.

    ``snapshots[k]`` is the full ``(L, Z, A)`` table stack after step
    ``times[k]``; ``visits`` counts updates per ``(phase, z, a)``.
    """

    seed: int
    times: np.ndarray
    snapshots: np.ndarray
    final: np.ndarray
    visits: np.ndarray
    config_digest: str = ""
    schedule: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def period(self) -> int:
        return self.final.shape[0]

    @property
    def steps(self) -> int:
        return int(self.visits.sum())


def config_digest(obj) -> str:
    """Short stable hash of a JSON-serialisable description."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _check_dims(model: PomdpModel, asm: AgentStateMachine, ppol: PeriodicPolicy) -> None:
    Z, Y, A = asm.update_table.shape
    if (Y, A) != (model.num_obs, model.num_actions):
        raise ValueError(f"agent-state machine expects (Y, A) = {(Y, A)}, model has "
                         f"{(model.num_obs, model.num_actions)}")
    if ppol.phases[0].probs.shape != (Z, A):
        raise ValueError(f"behavior policy shape {ppol.phases[0].probs.shape} does not match "
                         f"(Z, A) = {(Z, A)}")


def _run(model: PomdpModel, asm: AgentStateMachine, behavior: PeriodicPolicy,
         reg: Regularizer, sched: LearningRateSchedule, steps: int, seed: int,
         log_every: int | None, allow_noncompliant: bool, digest: str) -> RunRecord:
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not sched.compliant and not allow_noncompliant:
        raise ValueError(f"schedule {sched.spec()} violates the Robbins-Monro conditions; "
                         "pass allow_noncompliant=True to use it anyway")
    _check_dims(model, asm, behavior)
    if log_every is None:
        log_every = max(1, steps // SNAPSHOTS_PER_RUN)
    L = behavior.period
    Z, A = asm.num_agent_states, model.num_actions
    Y = model.num_obs
    gamma = model.discount

    Q = [[[0.0] * A for _ in range(Z)] for _ in range(L)]
    conj = reg.conjugate_row
    V = [[conj(row) for row in Ql] for Ql in Q]
    visits = [[[0] * A for _ in range(Z)] for _ in range(L)]
    reward = model.reward.tolist()
    kcdf = model._kernel_cdfs
    pcdf = [p.cdfs for p in behavior.phases]
    phi = asm.update_table.tolist()
    rate = sched.rate

    rng = RngStream(seed)
    uniform = rng.uniform
    s = sample_initial(model, rng)
    z = asm.start(sample_initial_obs(model, s, rng))

    times, snaps = [], []
    ell = 0
    for t in range(1, steps + 1):
        nxt = ell + 1 if ell + 1 < L else 0
        a = pick(pcdf[ell][z], uniform())
        s2, y2 = divmod(pick(kcdf[s][a], uniform()), Y)
        z2 = phi[z][y2][a]
        row = Q[ell][z]
        cnt = visits[ell][z]
        cnt[a] += 1
        row[a] += rate(cnt[a]) * (reward[s][a] + gamma * V[nxt][z2] - row[a])
        V[ell][z] = conj(row)
        if t % log_every == 0 or t == steps:
            times.append(t)
            snaps.append(np.array(Q))
        s, z, ell = s2, z2, nxt

    return RunRecord(seed=seed, times=np.array(times, dtype=np.int64),
                     snapshots=np.stack(snaps), final=np.array(Q),
                     visits=np.array(visits, dtype=np.int64),
                     config_digest=digest, schedule=sched.spec())


def run_rasql(model: PomdpModel, asm: AgentStateMachine, behavior: Policy, reg: Regularizer,
              sched: LearningRateSchedule | None = None, steps: int = 100_000, seed: int = 0,
              log_every: int | None = None, allow_noncompliant: bool = False,
              config_digest: str = "") -> RunRecord:
    """Regularized agent-state Q-learning under a stationary behavior policy."""
    if isinstance(behavior, PeriodicPolicy) and behavior.period != 1:
        raise ValueError("run_rasql takes a stationary policy; use run_repasql")
    return _run(model, asm, as_periodic(behavior), reg, sched or LearningRateSchedule(),
                steps, seed, log_every, allow_noncompliant, config_digest)


def run_repasql(model: PomdpModel, asm: AgentStateMachine, behavior: PeriodicPolicy,
                reg: Regularizer, sched: LearningRateSchedule | None = None,
                steps: int = 100_000, seed: int = 0, log_every: int | None = None,
                allow_noncompliant: bool = False, config_digest: str = "") -> RunRecord:
    """Periodic variant: one table per phase of ``behavior``."""
    return _run(model, asm, as_periodic(behavior), reg, sched or LearningRateSchedule(),
                steps, seed, log_every, allow_noncompliant, config_digest)


def run_asql(model: PomdpModel, asm: AgentStateMachine, behavior: Policy,
             sched: LearningRateSchedule | None = None, steps: int = 100_000, seed: int = 0,
             log_every: int | None = None, allow_noncompliant: bool = False,
             config_digest: str = "") -> RunRecord:
    """Unregularized baseline: bootstrap with the max over next actions."""
    return run_rasql(model, asm, behavior, Unregularized(), sched, steps, seed, log_every,
                     allow_noncompliant, config_digest)
