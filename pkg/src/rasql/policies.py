"""Stationary and periodic agent-state policies."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .regularizers import Regularizer
from .rng import RngStream, make_cdf

ROW_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Policy:
    """Table ``probs[z, a]`` = pi(a | z)."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2:
            raise ValueError(f"policy table must be 2-D (z, a), got shape {p.shape}")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > ROW_TOL):
            raise ValueError("policy rows must be probability vectors")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def num_agent_states(self) -> int:
        return self.probs.shape[0]

    @property
    def num_actions(self) -> int:
        return self.probs.shape[1]

    @cached_property
    def cdfs(self) -> list[list[float]]:
        return [make_cdf(row) for row in self.probs]


@dataclass(frozen=True, eq=False)
class PeriodicPolicy:
    """``L`` policies applied cyclically; time ``t`` uses phase ``(t - 1) mod L``."""

    phases: tuple[Policy, ...]

    def __post_init__(self):
        phases = tuple(p if isinstance(p, Policy) else Policy(p) for p in self.phases)
        if not phases:
            raise ValueError("a periodic policy needs at least one phase")
        shapes = {p.probs.shape for p in phases}
        if len(shapes) != 1:
            raise ValueError(f"phase policies have mismatched shapes {sorted(shapes)}")
        object.__setattr__(self, "phases", phases)

    @property
    def period(self) -> int:
        return len(self.phases)

    @classmethod
    def stationary(cls, policy: Policy) -> PeriodicPolicy:
        return cls((policy,))


def as_periodic(policy: Policy | PeriodicPolicy) -> PeriodicPolicy:
    return policy if isinstance(policy, PeriodicPolicy) else PeriodicPolicy((policy,))


def phase_of(t: int, period: int) -> int:
    """Phase of time ``t >= 1``; ``t = 1`` is phase 0."""
    if t < 1:
        raise ValueError("time index starts at 1")
    return (t - 1) % period


def phase_policy(ppol: PeriodicPolicy, t: int) -> Policy:
    return ppol.phases[phase_of(t, ppol.period)]


def sample_action(pol: Policy, z: int, rng: RngStream) -> int:
    return rng.categorical(pol.cdfs[z])


def greedy_policy(q, reg: Regularizer) -> Policy:
    """Row ``z`` is the maximizer of ``<xi, q[z]> - omega(xi)``."""
    probs = np.asarray(reg.gradient(q), dtype=float)
    # softmax output is normalised up to rounding; re-normalise for the row check
    return Policy(probs / probs.sum(axis=1, keepdims=True))


def uniform_policy(num_agent_states: int, num_actions: int) -> Policy:
    return Policy(np.full((num_agent_states, num_actions), 1.0 / num_actions))
