import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rasql.agent_state import (make_constant, make_observation_state, make_sliding_window,
                               make_table, update)
from rasql.pomdp import sample_initial, sample_initial_obs, step
from rasql.rng import RngStream


def test_observation_machine_tracks_observation():
    asm = make_observation_state(2, 2)
    assert asm.num_agent_states == 2
    for z in range(2):
        for a in range(2):
            assert update(asm, z, 1, a) == 1
    assert update(asm, 1, 0, 0) == 0


def test_window_shift():
    asm = make_sliding_window(2, 2, 2)
    idx = {t: i for i, t in enumerate(asm.labels)}
    assert asm.labels[update(asm, idx[(0, 1)], 1, 0)] == (1, 1)
    assert asm.labels[update(asm, idx[(1, 0)], 1, 1)] == (0, 1)


def test_window_state_counts():
    assert make_sliding_window(2, 2, 2, pad=False).num_agent_states == 4
    assert make_sliding_window(2, 2, 2).num_agent_states == 9


def test_window_padding_start():
    asm = make_sliding_window(3, 1, 3)
    assert asm.labels[asm.init_state] == (None, None, None)
    assert asm.labels[asm.start(2)] == (None, None, 2)


def test_window_unpadded_start_fills_window():
    asm = make_sliding_window(2, 1, 3, pad=False)
    assert asm.labels[asm.start(1)] == (1, 1, 1)


def test_window_size_guard():
    with pytest.raises(ValueError, match="cap"):
        make_sliding_window(10, 2, 6, max_states=1000)


def test_constant_machine():
    asm = make_constant(3, 2)
    assert asm.num_agent_states == 1
    assert all(update(asm, 0, y, a) == 0 for y in range(3) for a in range(2))


def test_table_machine_validates_entries():
    with pytest.raises(ValueError):
        make_table(np.full((2, 2, 2), 2))
    asm = make_table([[[1], [0]], [[1], [1]]])
    assert asm.start(0) == 1 and asm.start(1) == 0


def test_update_index_errors():
    asm = make_observation_state(2, 2)
    with pytest.raises(IndexError):
        update(asm, 0, 2, 0)


def _run_machine(asm, ys, acts):
    z = asm.start(ys[0])
    out = [z]
    for y, a in zip(ys[1:], acts):
        z = update(asm, z, y, a)
        out.append(z)
    return out


obs_seq = st.lists(st.integers(0, 2), min_size=1, max_size=40)


@given(obs_seq, st.data())
def test_window_one_matches_observation_machine(ys, data):
    acts = data.draw(st.lists(st.integers(0, 1), min_size=len(ys) - 1, max_size=len(ys) - 1))
    a = _run_machine(make_observation_state(3, 2), ys, acts)
    b = _run_machine(make_sliding_window(3, 2, 1), ys, acts)
    c = _run_machine(make_sliding_window(3, 2, 1, pad=False), ys, acts)
    assert a == b == c == ys


@given(st.integers(1, 3), obs_seq, st.data())
def test_closure(k, ys, data):
    asm = make_sliding_window(3, 2, k)
    acts = data.draw(st.lists(st.integers(0, 1), min_size=len(ys) - 1, max_size=len(ys) - 1))
    zs = _run_machine(asm, ys, acts)
    assert all(0 <= z < asm.num_agent_states for z in zs)
    # the last state's label holds the last k observations (padded at the front)
    label = asm.labels[zs[-1]]
    tail = tuple(ys[-k:])
    assert label[len(label) - len(tail):] == tail


def test_z_trajectory_equals_y_trajectory(paper_model, obs_asm):
    rng = RngStream(8)
    s = sample_initial(paper_model, rng)
    y = sample_initial_obs(paper_model, s, rng)
    z = obs_asm.start(y)
    for _ in range(2000):
        assert z == y
        a = int(rng.uniform() < 0.5)
        s, y, _ = step(paper_model, s, a, rng)
        z = update(obs_asm, z, y, a)
