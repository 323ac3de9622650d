"""Deterministic agent-state machines ``z' = phi(z, y', a)``."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

DEFAULT_MAX_STATES = 100_000


@dataclass(frozen=True, eq=False)
class AgentStateMachine:
    """Finite agent-state machine.

    Attributes:
        update_table: int array ``(Z, Y, A)``; entry ``[z, y', a]`` is the successor.
        start_table: int array ``(Y,)`` mapping the first observation to z_1.
        init_state: z_0, the state the machine is in before any observation.
        labels: optional human-readable name per agent state.
    """

    update_table: np.ndarray
    start_table: np.ndarray
    init_state: int = 0
    labels: tuple | None = None

    def __post_init__(self):
        table = np.array(self.update_table, dtype=np.int64)
        start = np.array(self.start_table, dtype=np.int64)
        if table.ndim != 3:
            raise ValueError(f"update_table must be 3-D (z, y', a), got shape {table.shape}")
        Z, Y, _ = table.shape
        if start.shape != (Y,):
            raise ValueError(f"start_table must have one entry per observation, got {start.shape}")
        for name, arr in [("update_table", table), ("start_table", start)]:
            if arr.size and (arr.min() < 0 or arr.max() >= Z):
                raise ValueError(f"{name} has entries outside [0, {Z})")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not 0 <= self.init_state < Z:
            raise ValueError(f"init_state {self.init_state} outside [0, {Z})")

    @property
    def num_agent_states(self) -> int:
        return self.update_table.shape[0]

    @property
    def num_obs(self) -> int:
        return self.update_table.shape[1]

    @property
    def num_actions(self) -> int:
        return self.update_table.shape[2]

    def start(self, y1: int) -> int:
        """Agent state z_1 after the first observation."""
        return int(self.start_table[y1])


def update(asm: AgentStateMachine, z: int, y: int, a: int) -> int:
    Z, Y, A = asm.update_table.shape
    if not (0 <= z < Z and 0 <= y < Y and 0 <= a < A):
        raise IndexError(f"(z={z}, y'={y}, a={a}) out of range for table shape {(Z, Y, A)}")
    return int(asm.update_table[z, y, a])


def make_observation_state(num_obs: int, num_actions: int = 1) -> AgentStateMachine:
    """The agent state is the latest observation."""
    if num_obs < 1:
        raise ValueError("num_obs must be >= 1")
    ys = np.arange(num_obs)
    table = np.broadcast_to(ys[None, :, None], (num_obs, num_obs, num_actions))
    return AgentStateMachine(table, ys, init_state=0, labels=tuple(range(num_obs)))


def make_sliding_window(num_obs: int, num_actions: int, k: int, pad: bool = True,
                        max_states: int = DEFAULT_MAX_STATES) -> AgentStateMachine:
    """Window over the last ``k`` observations.

    With ``pad=True`` the states are all tuples over ``{pad, 0, ..., Y-1}``
    (``(Y+1)^k`` of them, labelled with ``None`` for padding), ``z_0`` is the
    all-padding tuple and ``z_1 = (pad, ..., pad, y_1)``. The padded states
    are transient, so their limiting mass is zero. With ``pad=False`` there
    are ``Y^k`` states and the first observation fills the whole window.

    Full windows come first, so for ``k = 1`` indices coincide with
    :func:`make_observation_state`.
    """
    if k < 1:
        raise ValueError("window length k must be >= 1")
    count = (num_obs + pad) ** k
    if count > max_states:
        raise ValueError(f"window of length {k} over {num_obs} observations needs {count} "
                         f"agent states, above the cap of {max_states}")
    tuples = list(itertools.product(range(num_obs), repeat=k))
    if pad:
        symbols = (None,) + tuple(range(num_obs))
        tuples += [t for t in itertools.product(symbols, repeat=k) if None in t]
    index = {t: i for i, t in enumerate(tuples)}
    table = np.empty((len(tuples), num_obs, num_actions), dtype=np.int64)
    for t, i in index.items():
        for y in range(num_obs):
            table[i, y, :] = index[t[1:] + (y,)]
    if pad:
        z0 = index[(None,) * k]
        start = table[z0, :, 0].copy()
    else:
        z0 = 0
        start = np.array([index[(y,) * k] for y in range(num_obs)])
    return AgentStateMachine(table, start, init_state=z0, labels=tuple(tuples))


def make_table(update_table, start_table=None, init_state: int = 0) -> AgentStateMachine:
    """Machine from an explicit table; by default ``z_1 = phi(z_0, y_1, 0)``."""
    table = np.asarray(update_table, dtype=np.int64)
    if start_table is None:
        start_table = table[init_state, :, 0]
    return AgentStateMachine(table, start_table, init_state=init_state)


def make_constant(num_obs: int, num_actions: int) -> AgentStateMachine:
    return AgentStateMachine(np.zeros((1, num_obs, num_actions), dtype=np.int64),
                             np.zeros(num_obs, dtype=np.int64))
