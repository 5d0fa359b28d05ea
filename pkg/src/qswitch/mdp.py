"""Finite MDPs in the compact stacked-matrix form.

All vectors over state-action pairs are stored *action-major*: the pair
``(s, a)`` (0-based) lives at index ``a * num_states + s``, so that
``Q = [Q_1; ...; Q_|A|]`` with ``Q_a = Q(., a)``.  Policies are tuples of
0-based action indices, one per state.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULTS
from .errors import ConvergenceError, InvalidInputError, PolicyCapError

Policy = tuple[int, ...]

_PROB_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Mdp:
    """Finite discounted MDP with a fixed state-action sampling distribution.

    Parameters
    ----------
    transitions : (|A|, |S|, |S|) array
        ``transitions[a]`` is the row-stochastic matrix ``P_a``.
    rewards : (|A|, |S|) array
        Expected rewards ``R_a(s)``.
    gamma : float
        Discount factor in ``[0, 1)``.
    dist : (|S||A|,) array
        Sampling probabilities ``d`` of state-action pairs, action-major.
    behavior : (|S|, |A|) array, optional
        Behavior policy that generated ``dist``, when known.
    """

    transitions: np.ndarray
    rewards: np.ndarray
    gamma: float
    dist: np.ndarray
    behavior: np.ndarray | None = field(default=None)

    def __post_init__(self):
        for name in ("transitions", "rewards", "dist"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.behavior is not None:
            beh = np.array(self.behavior, dtype=float)
            beh.setflags(write=False)
            object.__setattr__(self, "behavior", beh)
        object.__setattr__(self, "gamma", float(self.gamma))
        if self.transitions.ndim != 3:
            raise InvalidInputError("transitions must have shape (|A|, |S|, |S|)")

    @property
    def num_states(self) -> int:
        return self.transitions.shape[1]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[0]

    @property
    def num_pairs(self) -> int:
        return self.num_states * self.num_actions

    @property
    def reward_vector(self) -> np.ndarray:
        """Stacked reward vector ``R`` (action-major)."""
        return self.rewards.reshape(-1)

    def with_gamma(self, gamma: float) -> "Mdp":
        return Mdp(self.transitions, self.rewards, gamma, self.dist, self.behavior)


def pair_index(s: int, a: int, num_states: int) -> int:
    return a * num_states + s


def validate(mdp: Mdp) -> list[str]:
    """Return every broken invariant of ``mdp`` (empty list means valid)."""
    problems = []
    P = mdp.transitions
    nA, nS = P.shape[0], P.shape[1]
    if P.shape != (nA, nS, nS):
        problems.append(f"transitions shape {P.shape} is not (|A|, |S|, |S|)")
        return problems
    for a in range(nA):
        for s in range(nS):
            row = P[a, s]
            if np.any(row < 0):
                j = int(np.argmin(row))
                problems.append(f"P[{a}][{s}][{j}] is negative ({row[j]!r})")
            total = row.sum()
            if abs(total - 1.0) > _PROB_TOL:
                problems.append(f"P[{a}] row {s}: row sum {total:.12g}")
    if mdp.rewards.shape != (nA, nS):
        problems.append(f"rewards shape {mdp.rewards.shape} is not ({nA}, {nS})")
    if not np.all(np.isfinite(mdp.rewards)):
        problems.append("rewards contain non-finite values")
    if not 0.0 <= mdp.gamma < 1.0:
        problems.append(f"gamma {mdp.gamma!r} not in [0, 1)")
    d = mdp.dist
    if d.shape != (nA * nS,):
        problems.append(f"dist shape {d.shape} is not ({nA * nS},)")
    else:
        for i in np.flatnonzero(~(d > 0)):
            problems.append(f"dist[{i}] = {d[i]!r} is not strictly positive")
        if abs(d.sum() - 1.0) > _PROB_TOL:
            problems.append(f"dist sums to {d.sum():.12g}")
    if mdp.behavior is not None:
        beh = mdp.behavior
        if beh.shape != (nS, nA):
            problems.append(f"behavior shape {beh.shape} is not ({nS}, {nA})")
        elif np.any(beh < 0) or np.any(np.abs(beh.sum(axis=1) - 1.0) > _PROB_TOL):
            problems.append("behavior rows are not probability vectors")
    return problems


def check(mdp: Mdp) -> Mdp:
    """Raise :class:`InvalidInputError` listing all violations, else return ``mdp``."""
    problems = validate(mdp)
    if problems:
        raise InvalidInputError("invalid MDP: " + "; ".join(problems))
    return mdp


def stacked_transition(mdp: Mdp) -> np.ndarray:
    """Vertical stack ``P = [P_1; ...; P_|A|]`` of shape ``(|S||A|, |S|)``."""
    return mdp.transitions.reshape(mdp.num_pairs, mdp.num_states)


def diag_distribution(mdp: Mdp) -> np.ndarray:
    return np.diag(mdp.dist)


def policy_matrix(pi, num_states: int, num_actions: int) -> np.ndarray:
    """Selector matrix ``Pi_pi`` of shape ``(|S|, |S||A|)``.

    Row ``s`` has a single one at the pair ``(s, pi[s])``, so that
    ``Pi_pi @ Q`` picks ``Q(s, pi(s))`` for each state.
    """
    pi = np.asarray(pi, dtype=int)
    if pi.shape != (num_states,) or np.any(pi < 0) or np.any(pi >= num_actions):
        raise InvalidInputError(f"invalid policy {tuple(pi)} for |S|={num_states}, |A|={num_actions}")
    M = np.zeros((num_states, num_states * num_actions))
    M[np.arange(num_states), pi * num_states + np.arange(num_states)] = 1.0
    return M


def greedy_policy(q, num_states: int, num_actions: int) -> Policy:
    """Per-state argmax of ``q``; ties go to the lowest action index."""
    table = np.asarray(q, dtype=float).reshape(num_actions, num_states)
    return tuple(int(a) for a in np.argmax(table, axis=0))


def greedy_max(q, num_states: int, num_actions: int) -> np.ndarray:
    """``max_a Q(s, a)`` for every state, i.e. ``Pi_{pi_Q} Q``."""
    return np.asarray(q, dtype=float).reshape(num_actions, num_states).max(axis=0)


def num_policies(num_states: int, num_actions: int) -> int:
    return num_actions**num_states


def policy_index(pi, num_actions: int) -> int:
    """Position of ``pi`` in :func:`enumerate_policies` order (first state most significant)."""
    idx = 0
    for a in pi:
        idx = idx * num_actions + int(a)
    return idx


def policy_from_index(index: int, num_states: int, num_actions: int) -> Policy:
    digits = []
    for _ in range(num_states):
        index, a = divmod(index, num_actions)
        digits.append(a)
    return tuple(reversed(digits))


def enumerate_policies(num_states: int, num_actions: int, cap: int | None = None) -> list[Policy]:
    """All deterministic policies in lexicographic order.

    Raises
    ------
    PolicyCapError
        If ``|A|^|S|`` exceeds ``cap`` (default ``10**6``).
    """
    cap = DEFAULTS["policy_cap"] if cap is None else cap
    count = num_policies(num_states, num_actions)
    if count > cap:
        raise PolicyCapError(f"|A|^|S| = {count} exceeds policy cap {cap}")
    return list(itertools.product(range(num_actions), repeat=num_states))


def bellman_operator(mdp: Mdp, q) -> np.ndarray:
    """``T q = R + gamma * P * Pi_{greedy(q)} q``."""
    v = greedy_max(q, mdp.num_states, mdp.num_actions)
    return mdp.reward_vector + mdp.gamma * (stacked_transition(mdp) @ v)


def solve_q_star(mdp: Mdp, tol: float | None = None, max_iter: int | None = None, q0=None) -> np.ndarray:
    """Optimal Q-function by value iteration.

    Stops once ``||T q - q||_inf <= tol`` and returns ``T q``, whose own
    residual is then at most ``gamma * tol``.

    Raises
    ------
    ConvergenceError
        If ``max_iter`` sweeps do not reach ``tol``.
    """
    tol = DEFAULTS["vi_tol"] if tol is None else tol
    max_iter = DEFAULTS["vi_max_iter"] if max_iter is None else max_iter
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    q = np.zeros(mdp.num_pairs) if q0 is None else np.array(q0, dtype=float)
    for _ in range(max_iter):
        tq = bellman_operator(mdp, q)
        if np.max(np.abs(tq - q)) <= tol:
            return tq
        q = tq
    raise ConvergenceError(f"value iteration did not reach tol={tol} in {max_iter} sweeps")


def behavior_chain(transitions, beta) -> np.ndarray:
    """State transition matrix ``P^beta(s, s') = sum_a beta(a|s) P_a(s, s')``."""
    return np.einsum("sa,ast->st", np.asarray(beta, float), np.asarray(transitions, float))


def stationary_state_distribution(transitions, beta, tol: float | None = None, max_iter: int = 1_000_000) -> np.ndarray:
    """Stationary distribution ``mu`` of the chain induced by ``beta`` (power iteration)."""
    tol = DEFAULTS["stationary_tol"] if tol is None else tol
    chain = behavior_chain(transitions, beta)
    mu = np.full(chain.shape[0], 1.0 / chain.shape[0])
    for _ in range(max_iter):
        nxt = mu @ chain
        nxt /= nxt.sum()
        if np.abs(nxt - mu).sum() <= tol:
            return nxt
        mu = nxt
    raise ConvergenceError("power iteration did not converge; chain may be periodic or reducible")


def stationary_state_action_distribution(transitions, beta, tol: float | None = None) -> np.ndarray:
    """``d(s, a) = mu(s) beta(a|s)``, returned action-major."""
    beta = np.asarray(beta, float)
    mu = stationary_state_distribution(transitions, beta, tol)
    return (mu[:, None] * beta).T.reshape(-1)


def from_behavior(transitions, rewards, gamma, beta) -> Mdp:
    """Build an :class:`Mdp` whose ``dist`` is the stationary distribution under ``beta``."""
    d = stationary_state_action_distribution(transitions, beta)
    return Mdp(transitions, rewards, gamma, d, behavior=beta)


def random_mdp(rng: np.random.Generator, num_states: int, num_actions: int, gamma=None, behavior: bool = False) -> Mdp:
    """Random MDP with Dirichlet rows, uniform rewards in [0, 1) and positive ``d``.

    With ``behavior=True`` the distribution is the stationary one under a
    random Dirichlet behavior policy; otherwise it is Dirichlet over pairs.
    """
    if num_states < 1 or num_actions < 1:
        raise InvalidInputError("need at least one state and one action")
    P = rng.dirichlet(np.ones(num_states), size=(num_actions, num_states))
    R = rng.uniform(0.0, 1.0, size=(num_actions, num_states))
    g = rng.uniform(0.5, 0.99) if gamma is None else gamma
    if behavior:
        beta = rng.dirichlet(np.ones(num_actions), size=num_states)
        return from_behavior(P, R, g, beta)
    d = rng.dirichlet(np.ones(num_states * num_actions))
    # Dirichlet draws can underflow to exactly 0
    d = np.maximum(d, 1e-12)
    return Mdp(P, R, g, d / d.sum())
