"""Algebraic stability certificates for switched linear families.

A family ``{A_sigma}`` is certified when, for some invertible ``L``, every
``L A_sigma L^{-1}`` has a strictly negative row dominating diagonal,
``[A]_ii + sum_{j != i} |[A]_ij| < 0`` for all rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULTS
from .errors import AssumptionError, InvalidInputError
from .linear_fa import check_features, feature_flags
from .mdp import (
    Mdp,
    diag_distribution,
    enumerate_policies,
    policy_matrix,
    stacked_transition,
)


@dataclass
class ModeMargins:
    policy: tuple | None
    margins: np.ndarray
    diagonal: np.ndarray | None = None
    off_diagonal: np.ndarray | None = None

    def to_dict(self) -> dict:
        out = {"policy": None if self.policy is None else list(self.policy), "margins": self.margins.tolist()}
        if self.diagonal is not None:
            out["diagonal"] = self.diagonal.tolist()
            out["off_diagonal"] = self.off_diagonal.tolist()
        return out


@dataclass
class StabilityReport:
    """Per-mode margins; the condition holds iff the worst margin is below ``-tol``."""

    per_mode: list[ModeMargins]
    transform: str
    condition: str = "row-dominance"
    tol: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def worst_margin(self) -> float:
        return float(max(np.max(m.margins) for m in self.per_mode))

    @property
    def holds(self) -> bool:
        return self.worst_margin < -self.tol

    @property
    def verdict(self) -> str:
        return "holds" if self.holds else "fails"

    def margins_for(self, policy) -> np.ndarray:
        for m in self.per_mode:
            if m.policy is not None and tuple(m.policy) == tuple(policy):
                return m.margins
        raise KeyError(policy)

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict,
            "worst_margin": self.worst_margin,
            "transform": self.transform,
            "condition": self.condition,
            "per_mode": [m.to_dict() for m in self.per_mode],
        }
        out.update(self.extra)
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def row_terms(A) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal entries and off-diagonal absolute row sums of a square matrix."""
    A = np.asarray(A, float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {A.shape}")
    diag = np.diag(A).copy()
    off = np.abs(A).sum(axis=1) - np.abs(diag)
    return diag, off


def row_dominating_margins(A) -> np.ndarray:
    diag, off = row_terms(A)
    return diag + off


def check_family(L, As, policies=None, transform: str | None = None) -> StabilityReport:
    """Margins of ``L A L^{-1}`` for every matrix in ``As``.

    Raises
    ------
    InvalidInputError
        If ``L`` is singular or not square.
    """
    L = np.asarray(L, float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise InvalidInputError("L must be square")
    cond = np.linalg.cond(L)
    if not np.isfinite(cond) or cond > 1e14:
        raise InvalidInputError("L is singular")
    L_inv = np.linalg.inv(L)
    per_mode = []
    for k, A in enumerate(As):
        Abar = L @ np.asarray(A, float) @ L_inv
        diag, off = row_terms(Abar)
        per_mode.append(ModeMargins(None if policies is None else tuple(policies[k]), diag + off, diag, off))
    if transform is None:
        transform = "identity" if np.array_equal(L, np.eye(L.shape[0])) else "custom"
    return StabilityReport(per_mode, transform)


def check_qlearning(mdp: Mdp) -> StabilityReport:
    """Row dominance with ``L = I`` over all modes ``g D P Pi - D``; margins equal ``d_i (g - 1)``."""
    P = stacked_transition(mdp)
    D = diag_distribution(mdp)
    pols = enumerate_policies(mdp.num_states, mdp.num_actions)
    As = [mdp.gamma * D @ P @ policy_matrix(pi, mdp.num_states, mdp.num_actions) - D for pi in pols]
    return check_family(np.eye(mdp.num_pairs), As, pols, transform="identity")


def check_averaging(mdp: Mdp, delta: float) -> StabilityReport:
    """Averaging family under ``L = blkdiag(I, sqrt(g) I)``."""
    from .switching import _averaging_blocks

    if not delta > 0:
        raise InvalidInputError(f"delta must be positive, got {delta!r}")
    n = mdp.num_pairs
    pols = enumerate_policies(mdp.num_states, mdp.num_actions)
    As = [_averaging_blocks(mdp, delta, policy_matrix(pi, mdp.num_states, mdp.num_actions)) for pi in pols]
    if mdp.gamma > 0.0:
        scale, label = np.sqrt(mdp.gamma), "blkdiag(I, gamma^(1/2) I)"
    else:
        # sqrt(0) would make L singular; any scale in (0, 1) certifies gamma = 0
        scale, label = 0.5, "blkdiag(I, 0.5 I)"
    L = np.diag(np.concatenate([np.ones(n), np.full(n, scale)]))
    return check_family(L, As, pols, transform=label)


def _require_lfa_assumptions(phi):
    flags = feature_flags(phi)
    if not flags.nonnegative:
        raise AssumptionError("feature matrix has negative entries")
    if not flags.orthogonal:
        raise AssumptionError("feature columns are not orthogonal")


def check_lfa_new_condition(mdp: Mdp, phi, policies=None) -> StabilityReport:
    """Row quantities ``-phi_i^T D phi_i + g phi_i^T D P Pi sum_j phi_j`` per policy.

    Under nonnegative orthogonal features these equal the row dominating
    margins of ``Phi^T (g D P Pi - D) Phi``; the diagonal and off-diagonal
    parts are reported separately.  ``policies`` defaults to all of Theta.
    """
    phi = check_features(mdp, phi)
    _require_lfa_assumptions(phi)
    if policies is None:
        policies = enumerate_policies(mdp.num_states, mdp.num_actions)
    P = stacked_transition(mdp)
    D = diag_distribution(mdp)
    g = mdp.gamma
    total = phi.sum(axis=1)
    own = np.einsum("pi,p,pi->i", phi, mdp.dist, phi)
    per_mode = []
    for pi in policies:
        Pi = policy_matrix(pi, mdp.num_states, mdp.num_actions)
        M = g * D @ P @ Pi
        margins = -own + phi.T @ M @ total
        diag = -own + np.einsum("pi,pq,qi->i", phi, M, phi)
        per_mode.append(ModeMargins(tuple(pi), margins, diag, margins - diag))
    return StabilityReport(per_mode, "identity", condition="lfa-row-dominance")


def check_melo_condition(mdp: Mdp, phi, policies=None, d_beta=None, tol: float | None = None) -> StabilityReport:
    """Melo's condition ``g^2 Phi^T Pi^T D^beta Pi Phi < Phi^T D Phi`` for every policy.

    The per-mode margin is the largest eigenvalue of
    ``g^2 Phi^T Pi^T D^beta Pi Phi - Phi^T D Phi``; the condition holds iff
    all of them are below ``-tol``.  ``d_beta`` (the stationary *state*
    distribution) defaults to the marginal of ``mdp.dist`` over actions.
    """
    phi = check_features(mdp, phi)
    tol = DEFAULTS["melo_tol"] if tol is None else tol
    if policies is None:
        policies = enumerate_policies(mdp.num_states, mdp.num_actions)
    if d_beta is None:
        d_beta = mdp.dist.reshape(mdp.num_actions, mdp.num_states).sum(axis=0)
    Db = np.diag(np.asarray(d_beta, float))
    gram = phi.T @ diag_distribution(mdp) @ phi
    per_mode = []
    matrices = []
    for pi in policies:
        Pi = policy_matrix(pi, mdp.num_states, mdp.num_actions)
        M = mdp.gamma**2 * phi.T @ Pi.T @ Db @ Pi @ phi - gram
        M = 0.5 * (M + M.T)
        matrices.append(M.tolist())
        per_mode.append(ModeMargins(tuple(pi), np.array([np.linalg.eigvalsh(M).max()])))
    return StabilityReport(per_mode, "none", condition="melo", tol=tol, extra={"matrices": matrices})


def check_binary_feature_guarantee(phi) -> bool:
    """True iff ``phi`` is binary with orthogonal columns whose sum is at most the ones vector."""
    phi = np.asarray(phi, float)
    flags = feature_flags(phi)
    return bool(flags.binary and flags.orthogonal and np.all(phi.sum(axis=1) <= 1.0))
