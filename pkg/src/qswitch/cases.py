"""The worked two-state, two-action examples used for reproduction."""

import numpy as np

from .mdp import Mdp, from_behavior

GAMMA = 0.9
BEHAVIOR = np.array([[0.2, 0.8], [0.7, 0.3]])

# Rewards shared by both examples below; the certificates do not depend on them.
REWARDS = np.array([[3.0, 1.0], [2.0, 1.0]])

LFA_TRANSITIONS = np.array(
    [
        [[0.5, 0.5], [1.0, 0.0]],
        [[0.0, 1.0], [2.0 / 3.0, 1.0 / 3.0]],
    ]
)


def figure_mdp() -> Mdp:
    """MDP behind the original and averaging ODE trajectory figures."""
    P = np.array(
        [
            [[0.2, 0.8], [0.3, 0.7]],
            [[0.5, 0.5], [0.7, 0.3]],
        ]
    )
    return from_behavior(P, REWARDS, GAMMA, BEHAVIOR)


def binary_feature_mdp() -> Mdp:
    """Uniform sampling over the four pairs, paired with :func:`binary_features`."""
    return Mdp(LFA_TRANSITIONS, REWARDS, GAMMA, np.full(4, 0.25))


def binary_features() -> np.ndarray:
    return np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])


def melo_mdp() -> Mdp:
    """Same dynamics sampled under the behavior policy; D = diag(0.1, 0.35, 0.4, 0.15)."""
    return from_behavior(LFA_TRANSITIONS, REWARDS, GAMMA, BEHAVIOR)


def melo_features() -> np.ndarray:
    return np.array([[1.0], [2.0], [0.0], [1.0]])
