"""Regularized agent-state Q-learning for finite POMDPs and its predicted limits."""

from .agent_state import (AgentStateMachine, make_observation_state, make_sliding_window,
                          make_table)
from .learner import LearningRateSchedule, RunRecord, run_asql, run_rasql, run_repasql
from .occupancy import (JointDistribution, NonErgodicError, ZeroVisitError,
                        conditional_s_given_z, joint_transition, limiting_distribution,
                        periodic_stationary, stationary_distribution, stationary_vector)
from .policies import PeriodicPolicy, Policy, greedy_policy, phase_policy, sample_action
from .pomdp import PomdpModel, from_factored, sample_initial, step, validate_model
from .regularizers import KL, Entropy, Unregularized, make_regularizer
from .solver import (InducedMdp, bellman_apply, build_induced_mdp, build_periodic_induced,
                     solve_fixed_point, solve_periodic_fixed_point)
from .rng import RngStream

__version__ = "0.1.0"
