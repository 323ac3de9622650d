import numpy as np

from rasql.pomdp import PomdpModel


def scalar_model(reward=1.0, gamma=0.9):
    """One state, one action, one observation."""
    return PomdpModel(np.ones((1, 1, 1, 1)), [[reward]], gamma, [1.0])


def random_mdp_as_pomdp(rng, S=4, A=2, gamma=0.9):
    """Fully observed POMDP: y' = s', so the observation agent state is the true state."""
    P = rng.dirichlet(np.ones(S), size=(S, A))
    r = rng.uniform(-1, 1, (S, A))
    kernel = P[:, :, :, None] * np.eye(S)[None, None, :, :]
    model = PomdpModel(kernel, r, gamma, np.full(S, 1.0 / S), init_obs=np.eye(S))
    return model, P, r
