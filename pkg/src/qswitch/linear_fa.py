"""Feature matrices, the D-weighted projection, projected Bellman fixed points and Theta_Phi."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULTS
from .errors import InvalidInputError, NoFixedPointError
from .mdp import (
    Mdp,
    Policy,
    diag_distribution,
    enumerate_policies,
    greedy_policy,
    policy_matrix,
    stacked_transition,
)

_ORTHO_TOL = 1e-12


@dataclass(frozen=True)
class FeatureFlags:
    full_column_rank: bool
    nonnegative: bool
    orthogonal: bool
    binary: bool


def feature_flags(phi) -> FeatureFlags:
    phi = np.asarray(phi, float)
    gram = phi.T @ phi
    off = gram - np.diag(np.diag(gram))
    scale = max(1.0, float(np.max(np.abs(gram))))
    return FeatureFlags(
        full_column_rank=bool(np.linalg.matrix_rank(phi) == phi.shape[1]),
        nonnegative=bool(np.all(phi >= 0)),
        orthogonal=bool(np.all(np.abs(off) <= _ORTHO_TOL * scale)),
        binary=bool(np.all((phi == 0) | (phi == 1))),
    )


def check_features(mdp: Mdp, phi) -> np.ndarray:
    phi = np.asarray(phi, float)
    if phi.ndim != 2 or phi.shape[0] != mdp.num_pairs:
        raise InvalidInputError(f"feature matrix must have {mdp.num_pairs} rows, got shape {phi.shape}")
    if not feature_flags(phi).full_column_rank:
        raise InvalidInputError("feature matrix is rank deficient")
    return phi


def projection(mdp: Mdp, phi) -> np.ndarray:
    """``Gamma = Phi (Phi^T D Phi)^{-1} Phi^T D``, the D-weighted projection onto range(Phi)."""
    phi = check_features(mdp, phi)
    D = diag_distribution(mdp)
    return phi @ np.linalg.solve(phi.T @ D @ phi, phi.T @ D)


def enumerate_theta_phi(mdp: Mdp, phi, samples: int | None = None, seed: int = 0) -> list[Policy]:
    """Policies that are greedy for ``Phi theta`` over sampled ``theta``.

    For one feature the three sign cases of ``theta`` are exact.  Otherwise
    ``theta = 0`` plus ``samples`` uniform unit-sphere draws are used, so the
    result may miss policies but never contains spurious ones.  Returned in
    lexicographic order.
    """
    phi = np.asarray(phi, float)
    samples = DEFAULTS["theta_phi_samples"] if samples is None else samples
    k = phi.shape[1]
    if k == 1:
        thetas = np.array([[1.0], [0.0], [-1.0]])
    else:
        rng = np.random.default_rng(seed)
        draws = rng.standard_normal((samples, k))
        draws /= np.linalg.norm(draws, axis=1, keepdims=True)
        thetas = np.vstack([np.zeros((1, k)), draws])
    q = (thetas @ phi.T).reshape(len(thetas), mdp.num_actions, mdp.num_states)
    acts = np.argmax(q, axis=1)
    return sorted({tuple(int(a) for a in row) for row in acts})


def solve_theta_star(mdp: Mdp, phi, tol: float | None = None, candidates=None) -> np.ndarray:
    """Solve the projected Bellman equation ``Phi theta = Gamma(g P Pi_{Phi theta} Phi theta + R)``.

    Each candidate policy fixes the max, giving the linear system
    ``Phi^T D Phi theta = g Phi^T D P Pi Phi theta + Phi^T D R``; a solution
    is kept only when its own greedy policy is that candidate and its
    projected Bellman residual is within ``tol``.  Candidates default to all
    of Theta, which contains every self-consistent policy.

    Raises
    ------
    NoFixedPointError
        If no candidate yields a self-consistent solution.
    """
    tol = DEFAULTS["tol"] if tol is None else tol
    phi = check_features(mdp, phi)
    D = diag_distribution(mdp)
    P = stacked_transition(mdp)
    g = mdp.gamma
    R = mdp.reward_vector
    if candidates is None:
        candidates = enumerate_policies(mdp.num_states, mdp.num_actions)
    gram = phi.T @ D @ phi
    rhs = phi.T @ D @ R
    for pi in candidates:
        Pi = policy_matrix(pi, mdp.num_states, mdp.num_actions)
        M = gram - g * phi.T @ D @ P @ Pi @ phi
        try:
            theta = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            continue
        if greedy_policy(phi @ theta, mdp.num_states, mdp.num_actions) != tuple(pi):
            continue
        if projected_bellman_residual(mdp, phi, theta) <= tol:
            return theta
    raise NoFixedPointError("no self-consistent projected Bellman solution found")


def projected_bellman_map(mdp: Mdp, phi, theta) -> np.ndarray:
    """``Gamma (g P Pi_{Phi theta} Phi theta + R)`` as a Q-vector."""
    phi = np.asarray(phi, float)
    q = phi @ np.asarray(theta, float)
    Pi = policy_matrix(greedy_policy(q, mdp.num_states, mdp.num_actions), mdp.num_states, mdp.num_actions)
    target = mdp.gamma * stacked_transition(mdp) @ Pi @ q + mdp.reward_vector
    return projection(mdp, phi) @ target


def projected_bellman_residual(mdp: Mdp, phi, theta) -> float:
    q = np.asarray(phi, float) @ np.asarray(theta, float)
    return float(np.max(np.abs(projected_bellman_map(mdp, phi, theta) - q)))


def random_partition_features(rng: np.random.Generator, num_pairs: int, num_features: int | None = None, weighted: bool = False) -> np.ndarray:
    """Nonnegative features with disjoint supports (hence orthogonal columns).

    Each pair is assigned to one feature or left uncovered; every feature is
    guaranteed at least one pair.  ``weighted=False`` gives a binary matrix.
    """
    if num_features is None:
        num_features = int(rng.integers(1, min(3, num_pairs) + 1))
    labels = rng.integers(-1, num_features, size=num_pairs)
    labels[rng.permutation(num_pairs)[:num_features]] = np.arange(num_features)
    phi = np.zeros((num_pairs, num_features))
    for i, lab in enumerate(labels):
        if lab >= 0:
            phi[i, lab] = rng.uniform(0.1, 3.0) if weighted else 1.0
    return phi
