"""Finite POMDP models and a seeded step simulator."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .rng import RngStream, make_cdf

PROB_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PomdpModel:
    """Finite POMDP with a dense joint kernel.

    Attributes:
        kernel: array ``(S, A, S', Y')`` holding P(s', y' | s, a).
        reward: array ``(S, A)``; any bounded range is accepted.
        discount: gamma in [0, 1).
        init_dist: initial state distribution rho over S.
        init_obs: array ``(S, Y)`` holding P(y_1 | s_1). When omitted it is
            inferred from the kernel as the observation distribution attached
            to each next state, which is exact whenever observations depend on
            the state alone.
    """

    kernel: np.ndarray
    reward: np.ndarray
    discount: float
    init_dist: np.ndarray
    init_obs: np.ndarray | None = field(default=None)

    def __post_init__(self):
        kernel = np.array(self.kernel, dtype=float)
        reward = np.array(self.reward, dtype=float)
        if kernel.ndim != 4:
            raise ValueError(f"kernel must be 4-D (s, a, s', y'), got shape {kernel.shape}")
        S, A, S2, Y = kernel.shape
        if S2 != S:
            raise ValueError(f"kernel next-state axis has size {S2}, expected {S}")
        if reward.shape != (S, A):
            raise ValueError(f"reward shape {reward.shape} does not match (S, A) = {(S, A)}")
        init_dist = np.array(self.init_dist, dtype=float)
        if init_dist.shape != (S,):
            raise ValueError(f"init_dist shape {init_dist.shape} does not match (S,) = {(S,)}")
        init_obs = self.init_obs
        if init_obs is None:
            init_obs = _infer_init_obs(kernel)
        init_obs = np.array(init_obs, dtype=float)
        if init_obs.shape != (S, Y):
            raise ValueError(f"init_obs shape {init_obs.shape} does not match (S, Y) = {(S, Y)}")
        for name, arr in [("kernel", kernel), ("reward", reward),
                          ("init_dist", init_dist), ("init_obs", init_obs)]:
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def num_states(self) -> int:
        return self.kernel.shape[0]

    @property
    def num_actions(self) -> int:
        return self.kernel.shape[1]

    @property
    def num_obs(self) -> int:
        return self.kernel.shape[3]

    @cached_property
    def obs_given_action(self) -> np.ndarray:
        """P(y' | s, a) = sum over s' of the joint kernel, shape ``(S, A, Y)``."""
        return self.kernel.sum(axis=2)

    @cached_property
    def state_transition(self) -> np.ndarray:
        """P(s' | s, a), shape ``(S, A, S)``."""
        return self.kernel.sum(axis=3)

    @cached_property
    def _kernel_cdfs(self) -> list[list[list[float]]]:
        S, A = self.num_states, self.num_actions
        flat = self.kernel.reshape(S, A, -1)
        return [[make_cdf(flat[s, a]) for a in range(A)] for s in range(S)]

    @cached_property
    def _init_cdf(self) -> list[float]:
        return make_cdf(self.init_dist)

    @cached_property
    def _init_obs_cdfs(self) -> list[list[float]]:
        return [make_cdf(row) for row in self.init_obs]


def _infer_init_obs(kernel: np.ndarray) -> np.ndarray:
    S, _, _, Y = kernel.shape
    joint = kernel.sum(axis=(0, 1))  # (s', y')
    mass = joint.sum(axis=1, keepdims=True)
    out = np.full((S, Y), 1.0 / Y)
    np.divide(joint, mass, out=out, where=mass > 0)
    return out


def from_factored(transition, observation_map, reward, discount, init_dist,
                  num_obs: int | None = None) -> PomdpModel:
    """Build a model from P(s' | s, a) and a deterministic observation map.

    ``transition`` is indexed ``(s, a, s')``. The joint kernel is
    ``P(s', y' | s, a) = P(s' | s, a) * 1{y' = obs(s')}`` and the first
    observation is ``obs(s_1)``.
    """
    P = np.asarray(transition, dtype=float)
    obs = np.asarray(observation_map, dtype=int)
    S, A, _ = P.shape
    if obs.shape != (S,):
        raise ValueError(f"observation_map must have one entry per state, got shape {obs.shape}")
    Y = int(num_obs) if num_obs is not None else int(obs.max()) + 1
    if obs.min() < 0 or obs.max() >= Y:
        raise ValueError("observation_map entries out of range")
    onehot = np.zeros((S, Y))
    onehot[np.arange(S), obs] = 1.0
    kernel = P[:, :, :, None] * onehot[None, None, :, :]
    return PomdpModel(kernel, reward, discount, init_dist, init_obs=onehot)


def validate_model(model: PomdpModel, strict_reward_range: tuple[float, float] | None = None
                   ) -> list[str]:
    """List every invariant violation of ``model``; empty means valid."""
    problems = []
    k = model.kernel
    if np.any(~np.isfinite(k)):
        problems.append("kernel has non-finite entries")
    for s, a, s2, y in zip(*np.nonzero(k < 0)):
        problems.append(f"kernel[{s},{a},{s2},{y}] = {k[s, a, s2, y]} is negative")
    sums = k.sum(axis=(2, 3))
    for s, a in zip(*np.nonzero(np.abs(sums - 1.0) > PROB_TOL)):
        problems.append(f"kernel row (s={s}, a={a}) sums to {sums[s, a]!r}, "
                        f"deficit {1.0 - sums[s, a]:.3g}")
    rho = model.init_dist
    for s in np.flatnonzero(rho < 0):
        problems.append(f"init_dist[{s}] = {rho[s]} is negative")
    if abs(rho.sum() - 1.0) > PROB_TOL:
        problems.append(f"init_dist sums to {rho.sum()!r}, deficit {1.0 - rho.sum():.3g}")
    io = model.init_obs
    if np.any(io < 0) or np.any(np.abs(io.sum(axis=1) - 1.0) > PROB_TOL):
        problems.append("init_obs rows are not probability vectors")
    if not np.all(np.isfinite(model.reward)):
        problems.append("reward has non-finite entries")
    elif strict_reward_range is not None:
        lo, hi = strict_reward_range
        if model.reward.min() < lo or model.reward.max() > hi:
            problems.append(f"reward outside [{lo}, {hi}]")
    if not 0.0 <= model.discount < 1.0:
        problems.append(f"discount {model.discount} outside [0, 1)")
    return problems


def check_model(model: PomdpModel) -> PomdpModel:
    problems = validate_model(model)
    if problems:
        raise ValueError("invalid POMDP model:\n  " + "\n  ".join(problems))
    return model


def step(model: PomdpModel, s: int, a: int, rng: RngStream) -> tuple[int, int, float]:
    """Sample ``(s', y', r)`` with ``r = reward[s, a]``."""
    if not (0 <= s < model.num_states and 0 <= a < model.num_actions):
        raise IndexError(f"(s={s}, a={a}) out of range for |S|={model.num_states}, "
                         f"|A|={model.num_actions}")
    idx = rng.categorical(model._kernel_cdfs[s][a])
    s2, y2 = divmod(idx, model.num_obs)
    return s2, y2, float(model.reward[s, a])


def sample_initial(model: PomdpModel, rng: RngStream) -> int:
    return rng.categorical(model._init_cdf)


def sample_initial_obs(model: PomdpModel, s: int, rng: RngStream) -> int:
    return rng.categorical(model._init_obs_cdfs[s])
