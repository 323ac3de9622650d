"""Limiting distributions of the joint chain (s, y, z, a) under a behavior policy.

The chain state at time t is ``(s_t, y_t, z_t, a_t)``. Joint states are
flattened in C order over the shape ``(S, Y, Z, A)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agent_state import AgentStateMachine
from .policies import PeriodicPolicy, Policy, as_periodic
from .pomdp import PomdpModel, sample_initial, sample_initial_obs
from .rng import RngStream, pick

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 1_000_000
# (z, a) pairs whose limiting mass is at or below this count as never visited
SUPPORT_FLOOR = 1e-9
IDENTITY_TOL = 1e-8


class AssumptionError(RuntimeError):
    """The behavior policy violates an ergodicity or exploration hypothesis."""


class NonErgodicError(AssumptionError):
    pass


class ZeroVisitError(AssumptionError):
    pass


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Probability mass over ``(s, y, z, a)``.

    ``partial`` is set when some (z, a) has no limiting mass and the caller
    allowed it anyway; downstream constructions then mask those pairs.
    """

    mass: np.ndarray
    residual: float = 0.0
    method: str = "power"
    partial: bool = False

    @property
    def za(self) -> np.ndarray:
        return self.mass.sum(axis=(0, 1))

    @property
    def support(self) -> np.ndarray:
        """Boolean ``(Z, A)`` table of pairs with positive limiting mass."""
        return self.za > SUPPORT_FLOOR

    @property
    def visited_states(self) -> np.ndarray:
        return self.za.sum(axis=1) > SUPPORT_FLOOR

    def check_support(self) -> None:
        missing = np.argwhere(~self.support)
        if len(missing):
            pairs = ", ".join(f"(z={z}, a={a})" for z, a in missing)
            raise ZeroVisitError(f"limiting distribution never visits {pairs}")


def joint_transition(model: PomdpModel, asm: AgentStateMachine, pol: Policy) -> np.ndarray:
    """Row-stochastic matrix of the joint chain when the next action follows ``pol``.

    Entry ``(s,y,z,a) -> (s',y',z',a')`` is
    ``P(s',y'|s,a) * 1{z' = phi(z,y',a)} * pol(a'|z')``.
    """
    S, A, Y = model.num_states, model.num_actions, model.num_obs
    Z = asm.num_agent_states
    if asm.update_table.shape != (Z, Y, A):
        raise ValueError(f"agent-state table shape {asm.update_table.shape} does not match "
                         f"(Z, Y, A) = {(Z, Y, A)}")
    if pol.probs.shape != (Z, A):
        raise ValueError(f"policy shape {pol.probs.shape} does not match (Z, A) = {(Z, A)}")
    succ = np.zeros((Z, Y, A, Z))
    z_idx, y_idx, a_idx = np.indices((Z, Y, A))
    succ[z_idx, y_idx, a_idx, asm.update_table] = 1.0
    block = np.einsum("sapy,zyaw,wb->szapywb", model.kernel, succ, pol.probs)
    full = np.broadcast_to(block[:, None], (S, Y, Z, A, S, Y, Z, A))
    n = S * Y * Z * A
    return np.ascontiguousarray(full).reshape(n, n)


def _check_stochastic(T: np.ndarray) -> None:
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError(f"transition matrix must be square, got shape {T.shape}")
    if np.any(T < 0) or np.any(np.abs(T.sum(axis=1) - 1.0) > 1e-10):
        raise ValueError("transition matrix is not row-stochastic")


def _iterate(T: np.ndarray, x: np.ndarray, tol: float, budget: int) -> tuple[np.ndarray, bool]:
    # Push the residual two decades past tol when floating point allows it,
    # so that restarts agree to well within 10 * tol.
    target = tol * 1e-2
    settled = 0
    for _ in range(budget):
        y = x @ T
        y /= y.sum()
        res = np.abs(y - x).sum()
        x = y
        if res <= target:
            return x, True
        if res <= tol:
            settled += 1
            if settled > 200:
                return x, True
    return x, False


def _solve(T: np.ndarray, x0: np.ndarray, tol: float, max_iter: int) -> tuple[np.ndarray, str]:
    half = max(max_iter // 2, 1)
    x, ok = _iterate(T, x0, tol, half)
    if ok:
        return x, "power"
    # Averaging with the identity keeps the stationary vector and kills periodicity.
    lazy = 0.5 * (T + np.eye(T.shape[0]))
    x, ok = _iterate(lazy, x, tol, max_iter - half)
    if ok and np.abs(x @ T - x).sum() <= tol:
        return x, "lazy"
    raise NonErgodicError(f"power iteration did not reach residual {tol} in {max_iter} sweeps")


def stationary_vector(T, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                      restarts: int = 5, seed: int = 0) -> np.ndarray:
    """Stationary distribution of a row-stochastic matrix by power iteration.

    Starts from the uniform vector; a periodic chain falls back to the lazy
    chain ``(I + T) / 2``. Uniqueness is checked by solving again from
    ``restarts`` random starting vectors and requiring pairwise l1 distance
    at most ``10 * tol``; disagreement raises :class:`NonErgodicError`.
    """
    return _stationary(T, tol, max_iter, restarts, seed)[0]


def _stationary(T, tol, max_iter, restarts, seed) -> tuple[np.ndarray, str]:
    T = np.asarray(T, dtype=float)
    _check_stochastic(T)
    n = T.shape[0]
    x, method = _solve(T, np.full(n, 1.0 / n), tol, max_iter)
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        x0 = rng.random(n)
        y, _ = _solve(T, x0 / x0.sum(), tol, max_iter)
        gap = np.abs(x - y).sum()
        if gap > 10 * tol:
            raise NonErgodicError(f"restarts disagree (l1 gap {gap:.3g}); "
                                  "the chain has more than one stationary distribution")
    return x, method


def stationary_distribution(T, shape: tuple[int, int, int, int], tol: float = DEFAULT_TOL,
                            max_iter: int = DEFAULT_MAX_ITER,
                            allow_partial: bool = False) -> JointDistribution:
    """Limiting joint distribution for the transition matrix ``T``.

    Raises :class:`ZeroVisitError` if some (z, a) has no limiting mass,
    unless ``allow_partial``.
    """
    T = np.asarray(T, dtype=float)
    x, method = _stationary(T, tol, max_iter, restarts=5, seed=0)
    residual = float(np.abs(x @ T - x).sum())
    zeta = JointDistribution(x.reshape(shape), residual, method)
    if not zeta.support.all():
        if not allow_partial:
            zeta.check_support()
        zeta = JointDistribution(zeta.mass, residual, method, partial=True)
    return zeta


def _shape(model: PomdpModel, asm: AgentStateMachine) -> tuple[int, int, int, int]:
    return (model.num_states, model.num_obs, asm.num_agent_states, model.num_actions)


def limiting_distribution(model: PomdpModel, asm: AgentStateMachine, pol: Policy,
                          tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                          allow_partial: bool = False) -> JointDistribution:
    T = joint_transition(model, asm, pol)
    return stationary_distribution(T, _shape(model, asm), tol, max_iter, allow_partial)


def periodic_stationary(model: PomdpModel, asm: AgentStateMachine, ppol: PeriodicPolicy,
                        tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                        allow_partial: bool = False) -> list[JointDistribution]:
    """Per-phase limiting distributions ``zeta^l`` of a periodic behavior policy.

    ``zeta^l`` is the long-run law of the chain at times of phase ``l``, when
    the action is drawn from phase ``l``. The step from phase ``l`` to
    ``l + 1`` therefore draws its next action from phase ``l + 1``.
    ``zeta^0`` solves the L-step skeleton chain and the others follow by
    propagation, which keeps the family mutually consistent.
    """
    ppol = as_periodic(ppol)
    L = ppol.period
    shape = _shape(model, asm)
    steps = [joint_transition(model, asm, ppol.phases[(l + 1) % L]) for l in range(L)]
    skeleton = steps[0]
    for T in steps[1:]:
        skeleton = skeleton @ T
    x, method = _stationary(skeleton, tol, max_iter, restarts=5, seed=0)
    zetas = []
    for l in range(L):
        rotated = np.eye(len(x))
        for j in range(L):
            rotated = rotated @ steps[(l + j) % L]
        residual = float(np.abs(x @ rotated - x).sum())
        if residual > tol:
            raise NonErgodicError(f"phase {l}: skeleton residual {residual:.3g} exceeds {tol}")
        zetas.append(JointDistribution(x.reshape(shape), residual, method))
        x = x @ steps[l]
        x /= x.sum()
    missing = [l for l, zeta in enumerate(zetas) if not zeta.support.all()]
    if missing:
        if not allow_partial:
            for l in missing:
                try:
                    zetas[l].check_support()
                except ZeroVisitError as err:
                    raise ZeroVisitError(f"phase {l}: {err}") from None
        zetas = [JointDistribution(z.mass, z.residual, z.method, partial=bool(missing))
                 for z in zetas]
    return zetas


def conditional_s_given_z(zeta: JointDistribution, allow_partial: bool = False) -> np.ndarray:
    """Table ``(Z, S)`` of zeta(s | z).

    Also checks that zeta(s | z, a) = zeta(s | z) for every visited (z, a),
    which holds because the action is drawn from z alone. Rows of unvisited
    agent states are NaN when ``allow_partial``.
    """
    sz = zeta.mass.sum(axis=(1, 3)).T  # (z, s)
    zm = sz.sum(axis=1, keepdims=True)
    visited = zm[:, 0] > SUPPORT_FLOOR
    if not visited.all() and not allow_partial:
        raise ZeroVisitError(f"agent states {np.flatnonzero(~visited).tolist()} have no "
                             "limiting mass")
    cond = np.full_like(sz, np.nan)
    np.divide(sz, zm, out=cond, where=visited[:, None])

    sza = zeta.mass.sum(axis=1).transpose(1, 2, 0)  # (z, a, s)
    za = sza.sum(axis=2)
    for z, a in np.argwhere(za > SUPPORT_FLOOR):
        gap = np.abs(sza[z, a] / za[z, a] - cond[z]).max()
        if gap > IDENTITY_TOL:
            raise ValueError(f"zeta(s|z,a) differs from zeta(s|z) by {gap:.3g} at "
                             f"(z={z}, a={a})")
    return cond


def empirical_frequencies(model: PomdpModel, asm: AgentStateMachine,
                          policy: Policy | PeriodicPolicy, steps: int, seed: int) -> np.ndarray:
    """Visit frequencies of ``(phase, z, a)`` along one simulated trajectory.

    Each phase's slice is normalised to sum to one. Uses the same
    initialisation convention as the learners.
    """
    ppol = as_periodic(policy)
    L = ppol.period
    rng = RngStream(seed)
    uniform = rng.uniform
    kcdf = model._kernel_cdfs
    pcdf = [p.cdfs for p in ppol.phases]
    phi = asm.update_table.tolist()
    Y = model.num_obs
    counts = np.zeros((L, asm.num_agent_states, model.num_actions), dtype=np.int64)
    flat = [[[0] * model.num_actions for _ in range(asm.num_agent_states)] for _ in range(L)]
    s = sample_initial(model, rng)
    z = asm.start(sample_initial_obs(model, s, rng))
    ell = 0
    for _ in range(steps):
        a = pick(pcdf[ell][z], uniform())
        flat[ell][z][a] += 1
        s, y = divmod(pick(kcdf[s][a], uniform()), Y)
        z = phi[z][y][a]
        ell = ell + 1 if ell + 1 < L else 0
    counts[:] = flat
    return counts / counts.sum(axis=(1, 2), keepdims=True)
