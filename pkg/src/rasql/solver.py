"""Induced MDP on the agent state and its regularized fixed points.

Given the limiting distribution of a behavior policy, averaging the true
model under zeta(s | z) yields an MDP on Z whose regularized Q fixed point is
the limit of regularized agent-state Q-learning. Q-tables are plain float
arrays of shape ``(Z, A)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agent_state import AgentStateMachine
from .occupancy import JointDistribution, conditional_s_given_z
from .pomdp import PomdpModel
from .regularizers import Regularizer

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 100_000


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class InducedMdp:
    """MDP on agent states.

    Attributes:
        reward: ``(Z, A)`` averaged reward r(z, a).
        transition: ``(Z, A, Z')`` averaged kernel P(z' | z, a).
        discount: gamma.
        mask: ``(Z, A)`` True where the pair is backed by limiting mass.
            Rows outside the mask are placeholders (zero reward, self-loop).
    """

    reward: np.ndarray
    transition: np.ndarray
    discount: float
    mask: np.ndarray | None = None

    def __post_init__(self):
        r = np.array(self.reward, dtype=float)
        p = np.array(self.transition, dtype=float)
        Z, A = r.shape
        if p.shape != (Z, A, Z):
            raise ValueError(f"transition shape {p.shape} does not match (Z, A, Z) = {(Z, A, Z)}")
        if not np.all(np.isfinite(r)):
            raise ValueError("induced reward has non-finite entries")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=2) - 1.0) > 1e-10):
            raise ValueError("induced transition rows are not stochastic")
        mask = np.ones((Z, A), bool) if self.mask is None else np.asarray(self.mask, bool)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "mask", mask)

    @property
    def num_agent_states(self) -> int:
        return self.reward.shape[0]

    @property
    def num_actions(self) -> int:
        return self.reward.shape[1]

    @property
    def partial(self) -> bool:
        return not self.mask.all()


def build_induced_mdp(model: PomdpModel, asm: AgentStateMachine,
                      zeta: JointDistribution) -> InducedMdp:
    """Average reward and next-agent-state law of the model under zeta(s | z).

    ``r(z,a) = sum_s r(s,a) zeta(s|z)`` and
    ``P(z'|z,a) = sum_{s,y'} 1{z' = phi(z,y',a)} P(y'|s,a) zeta(s|z)``.
    """
    allow = zeta.partial
    if not allow:
        zeta.check_support()
    cond = conditional_s_given_z(zeta, allow_partial=allow)  # (z, s)
    Z, A = asm.num_agent_states, model.num_actions
    visited = ~np.isnan(cond[:, 0])
    c = np.where(visited[:, None], cond, 0.0)
    reward = c @ model.reward
    obs = np.einsum("zs,say->zay", c, model.obs_given_action)
    transition = np.zeros((Z, A, Z))
    z_idx, y_idx, a_idx = np.indices(asm.update_table.shape)
    np.add.at(transition, (z_idx, a_idx, asm.update_table), obs[z_idx, a_idx, y_idx])
    mask = zeta.support & visited[:, None]
    for z in np.flatnonzero(~visited):
        transition[z, :, z] = 1.0
    return InducedMdp(reward, transition, model.discount, mask)


def build_periodic_induced(model: PomdpModel, asm: AgentStateMachine,
                           zetas: list[JointDistribution]) -> list[InducedMdp]:
    return [build_induced_mdp(model, asm, zeta) for zeta in zetas]


def bellman_apply(q: np.ndarray, mdp: InducedMdp, reg: Regularizer,
                  next_q: np.ndarray | None = None) -> np.ndarray:
    """``r + gamma * P V`` with ``V(z') = reg.conjugate(next_q[z'])``.

    ``next_q`` defaults to ``q``; the periodic operators bootstrap from the
    following phase's table instead.
    """
    v = reg.conjugate(q if next_q is None else next_q)
    return mdp.reward + mdp.discount * (mdp.transition @ v)


def solve_fixed_point(mdp: InducedMdp, reg: Regularizer, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER, q0: np.ndarray | None = None
                      ) -> np.ndarray:
    """Fixed point of the regularized Bellman operator by value iteration from ``q0`` (0)."""
    q = np.zeros_like(mdp.reward) if q0 is None else np.array(q0, dtype=float)
    for _ in range(max_iter):
        nxt = bellman_apply(q, mdp, reg)
        res = np.abs(nxt - q).max()
        q = nxt
        if res <= tol * (1 - mdp.discount):
            break
    else:
        raise SolverError(f"value iteration did not converge in {max_iter} sweeps")
    return q


def bellman_residual(q: np.ndarray, mdp: InducedMdp, reg: Regularizer) -> float:
    return float(np.abs(bellman_apply(q, mdp, reg) - q).max())


def periodic_apply(qs: list[np.ndarray], mdps: list[InducedMdp], reg: Regularizer
                   ) -> list[np.ndarray]:
    """One synchronous sweep: phase ``l`` bootstraps from phase ``l + 1``."""
    L = len(mdps)
    return [bellman_apply(qs[l], mdps[l], reg, next_q=qs[(l + 1) % L]) for l in range(L)]


def composed_apply(q: np.ndarray, mdps: list[InducedMdp], reg: Regularizer, start: int
                   ) -> np.ndarray:
    """``B^start B^(start+1) ... B^(start+L-1) q`` with indices mod L."""
    L = len(mdps)
    for j in reversed(range(L)):
        q = bellman_apply(q, mdps[(start + j) % L], reg)
    return q


def solve_periodic_fixed_point(mdps: list[InducedMdp], reg: Regularizer,
                               tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                               q0: list[np.ndarray] | None = None) -> list[np.ndarray]:
    """Tables ``Q^l = r^l + gamma P^l V^(l+1)`` for every phase, by Jacobi sweeps.

    Each returned table is also checked to be a fixed point of its composed
    L-step operator up to ``L * tol``.
    """
    L = len(mdps)
    if L < 1:
        raise ValueError("need at least one phase")
    gamma = mdps[0].discount
    qs = [np.zeros_like(m.reward) for m in mdps] if q0 is None else [np.array(q) for q in q0]
    for _ in range(max_iter):
        nxt = periodic_apply(qs, mdps, reg)
        res = max(np.abs(a - b).max() for a, b in zip(nxt, qs))
        qs = nxt
        if res <= tol * (1 - gamma):
            break
    else:
        raise SolverError(f"periodic value iteration did not converge in {max_iter} sweeps")
    for l in range(L):
        res = np.abs(composed_apply(qs[l], mdps, reg, l) - qs[l]).max()
        if res > L * tol:
            raise SolverError(f"phase {l}: composed-operator residual {res:.3g} exceeds {L * tol}")
    return qs


def contraction_factor(mdps: list[InducedMdp], reg: Regularizer, pairs: int = 100,
                       seed: int = 0, scale: float = 50.0) -> float:
    """Largest observed ``|BQ1 - BQ2| / |Q1 - Q2|`` (sup norms) over random pairs.

    ``B`` is the L-fold composed operator starting at each phase, so the
    factor should not exceed ``gamma ** L``.
    """
    rng = np.random.default_rng(seed)
    shape = mdps[0].reward.shape
    worst = 0.0
    for _ in range(pairs):
        q1 = rng.uniform(-scale, scale, shape)
        q2 = rng.uniform(-scale, scale, shape)
        gap = np.abs(q1 - q2).max()
        for start in range(len(mdps)):
            out = np.abs(composed_apply(q1, mdps, reg, start)
                         - composed_apply(q2, mdps, reg, start)).max()
            worst = max(worst, out / gap)
    return worst
