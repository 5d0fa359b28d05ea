"""Switched affine ODE models of Q-learning and their stability certificates."""

from .config import DEFAULTS
from .errors import (
    AssumptionError,
    BlowUpError,
    ConvergenceError,
    InvalidInputError,
    NoFixedPointError,
    PolicyCapError,
    QSwitchError,
)
from .harness import SandwichResult, fuzz, reproduce, verify_lipschitz, verify_quasimonotone, verify_sandwich
from .io import load_features, load_mdp, save_features, save_mdp
from .linear_fa import enumerate_theta_phi, feature_flags, projected_bellman_residual, solve_theta_star
from .mdp import (
    Mdp,
    bellman_operator,
    enumerate_policies,
    greedy_policy,
    policy_index,
    policy_matrix,
    random_mdp,
    solve_q_star,
    stationary_state_action_distribution,
)
from .qlearn import RunRecord, StepSizeSchedule, run, td_noise
from .stability import (
    StabilityReport,
    check_averaging,
    check_binary_feature_guarantee,
    check_lfa_new_condition,
    check_melo_condition,
    check_qlearning,
)
from .switching import SwitchedAffineSystem, Trajectory, integrate

__version__ = "0.1.0"
