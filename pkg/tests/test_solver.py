import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_mdp_as_pomdp, scalar_model
from oracles import (composed_fixed_point, hard_value_iteration, induced_mdp_loops,
                     soft_value_iteration)
from rasql.agent_state import make_constant, make_observation_state
from rasql.occupancy import limiting_distribution, periodic_stationary
from rasql.policies import PeriodicPolicy, Policy
from rasql.regularizers import Entropy, Unregularized
from rasql.solver import (InducedMdp, SolverError, bellman_apply, bellman_residual,
                          build_induced_mdp, build_periodic_induced, contraction_factor,
                          solve_fixed_point, solve_periodic_fixed_point)

TOL = 1e-12


@pytest.fixture(scope="module")
def paper_mdp(paper_model, obs_asm, paper_behavior):
    zeta = limiting_distribution(paper_model, obs_asm, paper_behavior)
    return build_induced_mdp(paper_model, obs_asm, zeta)


@pytest.fixture(scope="module")
def periodic_mdps(paper_model, obs_asm, paper_periodic):
    zetas = periodic_stationary(paper_model, obs_asm, paper_periodic)
    return build_periodic_induced(paper_model, obs_asm, zetas)


def test_fully_observed_recovers_mdp():
    rng = np.random.default_rng(1)
    model, P, r = random_mdp_as_pomdp(rng)
    asm = make_observation_state(4, 2)
    for _ in range(3):
        pol = Policy(rng.dirichlet(np.ones(2), size=4))
        mdp = build_induced_mdp(model, asm, limiting_distribution(model, asm, pol))
        assert np.abs(mdp.reward - r).max() <= 1e-10
        assert np.abs(mdp.transition - P).max() <= 1e-10


def test_single_agent_state_averages_reward(paper_model, paper_behavior):
    asm = make_constant(2, 2)
    pol = Policy([[0.3, 0.7]])
    zeta = limiting_distribution(paper_model, asm, pol)
    mdp = build_induced_mdp(paper_model, asm, zeta)
    occ = zeta.mass.sum(axis=(1, 2, 3))
    assert np.allclose(mdp.reward[0], occ @ paper_model.reward, atol=1e-12)
    assert np.array_equal(mdp.transition, np.ones((1, 2, 1)))


def test_paper_induced_matches_loops(paper_model, obs_asm, paper_behavior, paper_mdp):
    zeta = limiting_distribution(paper_model, obs_asm, paper_behavior)
    r, P = induced_mdp_loops(paper_model.kernel, paper_model.reward, obs_asm.update_table,
                             zeta.mass)
    assert np.abs(paper_mdp.reward - r).max() <= 1e-12
    assert np.abs(paper_mdp.transition - P).max() <= 1e-12
    assert np.abs(paper_mdp.transition.sum(axis=2) - 1).max() <= 1e-12


def test_invalid_mdp_rejected():
    with pytest.raises(ValueError):
        InducedMdp([[0.0]], [[[0.5]]], 0.9)
    with pytest.raises(ValueError):
        InducedMdp([[np.nan]], [[[1.0]]], 0.9)


def test_partial_support_masks_rows(paper_model, obs_asm):
    zeta = limiting_distribution(paper_model, obs_asm, Policy([[1.0, 0.0], [1.0, 0.0]]),
                                 allow_partial=True)
    mdp = build_induced_mdp(paper_model, obs_asm, zeta)
    assert mdp.partial
    assert mdp.mask[:, 0].all() and not mdp.mask[:, 1].any()


# --- Bellman operator -------------------------------------------------------

def test_scalar_apply():
    mdp = InducedMdp([[1.0]], [[[1.0]]], 0.9)
    for beta in (0.5, 1.0, 30.0):
        assert bellman_apply(np.zeros((1, 1)), mdp, Entropy(beta))[0, 0] == pytest.approx(1.0, abs=1e-15)


def test_apply_zero_table(paper_mdp):
    out = bellman_apply(np.zeros((2, 2)), paper_mdp, Entropy(1.0))
    assert np.allclose(out, paper_mdp.reward + 0.9 * math.log(2), atol=1e-14)


def test_contraction_stationary(paper_mdp):
    assert contraction_factor([paper_mdp], Entropy(1.0)) <= 0.9 + 1e-12


def test_contraction_periodic(periodic_mdps):
    assert contraction_factor(periodic_mdps, Entropy(1.0)) <= 0.81 + 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_contraction_random_pairs(seed):
    rng = np.random.default_rng(seed)
    Z, A = 3, 2
    mdp = InducedMdp(rng.uniform(-1, 1, (Z, A)), rng.dirichlet(np.ones(Z), size=(Z, A)), 0.8)
    q1, q2 = rng.uniform(-20, 20, (2, Z, A))
    for reg in (Entropy(float(rng.uniform(0.1, 10))), Unregularized()):
        gap = np.abs(bellman_apply(q1, mdp, reg) - bellman_apply(q2, mdp, reg)).max()
        assert gap <= 0.8 * np.abs(q1 - q2).max() + 1e-12


# --- fixed points -----------------------------------------------------------

def test_scalar_fixed_point():
    q = solve_fixed_point(InducedMdp([[1.0]], [[[1.0]]], 0.9), Entropy(1.0))
    assert abs(q[0, 0] - 10.0) <= TOL


def test_zero_reward_fixed_point():
    mdp = InducedMdp(np.zeros((2, 2)), np.full((2, 2, 2), 0.5), 0.9)
    q = solve_fixed_point(mdp, Entropy(1.0))
    assert np.abs(q - 0.9 * math.log(2) / 0.1).max() <= 1e-10
    assert q[0, 0] == pytest.approx(6.2383, abs=1e-4)


def test_residual_and_iteration_bound(paper_mdp):
    q = solve_fixed_point(paper_mdp, Entropy(1.0))
    assert bellman_residual(q, paper_mdp, Entropy(1.0)) <= TOL


def test_max_iter_reported(paper_mdp):
    with pytest.raises(SolverError):
        solve_fixed_point(paper_mdp, Entropy(1.0), max_iter=3)


def test_paper_fixed_point_matches_oracle(paper_mdp):
    q = solve_fixed_point(paper_mdp, Entropy(1.0))
    ref = soft_value_iteration(paper_mdp.reward, paper_mdp.transition, 0.9, 1.0)
    assert np.abs(q - ref).max() <= 1e-10
    assert np.allclose(q, [[6.40877026, 6.38442291], [6.3905642, 6.33062165]], atol=1e-8)


def test_fully_observed_fixed_point_matches_oracle():
    rng = np.random.default_rng(2)
    model, P, r = random_mdp_as_pomdp(rng)
    asm = make_observation_state(4, 2)
    ref = soft_value_iteration(r, P, 0.9, 1.0)
    for _ in range(3):
        pol = Policy(rng.dirichlet(np.ones(2), size=4))
        mdp = build_induced_mdp(model, asm, limiting_distribution(model, asm, pol))
        assert np.abs(solve_fixed_point(mdp, Entropy(1.0)) - ref).max() <= 1e-10


def test_unique_from_random_start(paper_mdp):
    rng = np.random.default_rng(5)
    base = solve_fixed_point(paper_mdp, Entropy(1.0))
    for _ in range(5):
        q = solve_fixed_point(paper_mdp, Entropy(1.0), q0=rng.uniform(-50, 50, (2, 2)))
        assert np.abs(q - base).max() <= 10 * TOL


@pytest.mark.parametrize("beta", [1.0, 10.0, 100.0])
def test_regularized_dominates_hard(paper_mdp, beta):
    soft = solve_fixed_point(paper_mdp, Entropy(beta))
    hard = solve_fixed_point(paper_mdp, Unregularized())
    assert (soft >= hard - 1e-12).all()
    assert np.abs(soft - hard).max() <= 0.9 / 0.1 * math.log(2) / beta + 1e-12


def test_hard_fixed_point_matches_oracle(paper_mdp):
    hard = solve_fixed_point(paper_mdp, Unregularized())
    ref = hard_value_iteration(paper_mdp.reward, paper_mdp.transition, 0.9)
    assert np.abs(hard - ref).max() <= 1e-10


# --- periodic ---------------------------------------------------------------

def test_periodic_single_phase_reduces(paper_mdp):
    qs = solve_periodic_fixed_point([paper_mdp], Entropy(1.0))
    assert np.abs(qs[0] - solve_fixed_point(paper_mdp, Entropy(1.0))).max() <= TOL


def test_periodic_identical_phases(paper_mdp):
    qs = solve_periodic_fixed_point([paper_mdp] * 3, Entropy(1.0))
    assert max(np.abs(q - qs[0]).max() for q in qs) <= 10 * TOL


def test_periodic_identical_policies_identical_mdps(paper_model, obs_asm, paper_behavior):
    zetas = periodic_stationary(paper_model, obs_asm, PeriodicPolicy((paper_behavior,) * 2))
    a, b = build_periodic_induced(paper_model, obs_asm, zetas)
    assert np.abs(a.reward - b.reward).max() <= 1e-10
    assert np.abs(a.transition - b.transition).max() <= 1e-10


def test_periodic_matches_composed_oracle(periodic_mdps):
    qs = solve_periodic_fixed_point(periodic_mdps, Entropy(1.0))
    ref = composed_fixed_point([(m.reward, m.transition, m.discount) for m in periodic_mdps], 1.0)
    for q, r in zip(qs, ref):
        assert np.abs(q - r).max() <= 1e-10
    for m in periodic_mdps:
        assert np.abs(m.transition.sum(axis=2) - 1).max() <= 1e-12


def test_scalar_model_limit_through_pipeline():
    model = scalar_model()
    asm = make_observation_state(1, 1)
    mdp = build_induced_mdp(model, asm, limiting_distribution(model, asm, Policy([[1.0]])))
    assert abs(solve_fixed_point(mdp, Entropy(1.0))[0, 0] - 10.0) <= TOL
