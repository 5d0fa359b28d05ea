"""Switched affine ODE models of the Q-learning variants and their comparison systems.

Every system has the form ``dx/dt = A_sigma x + b_sigma`` where the mode
``sigma`` is picked by a switching rule.  Modes are indexed by policy
position (see :func:`qswitch.mdp.policy_index`), so a system over an MDP
with ``|A|^|S|`` policies has that many modes, realizable or not.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .config import DEFAULTS
from .errors import AssumptionError, BlowUpError, InvalidInputError
from .mdp import (
    Mdp,
    diag_distribution,
    enumerate_policies,
    greedy_policy,
    policy_index,
    policy_matrix,
    stacked_transition,
)


@dataclass(frozen=True)
class GreedyRule:
    """``sigma(x) = psi(greedy(coord @ x + offset))``."""

    num_states: int
    num_actions: int
    coord: np.ndarray
    offset: np.ndarray

    def __call__(self, t: float, x: np.ndarray) -> int:
        q = self.coord @ x + self.offset
        return policy_index(greedy_policy(q, self.num_states, self.num_actions), self.num_actions)


@dataclass(frozen=True)
class FixedRule:
    mode: int

    def __call__(self, t: float, x: np.ndarray) -> int:
        return self.mode


@dataclass(frozen=True)
class ScheduleRule:
    """Open-loop switching signal ``t -> mode``."""

    schedule: Callable[[float], int]

    def __call__(self, t: float, x: np.ndarray) -> int:
        return int(self.schedule(t))


@dataclass(frozen=True, eq=False)
class SwitchedAffineSystem:
    A: np.ndarray  # (M, n, n)
    b: np.ndarray  # (M, n)
    rule: GreedyRule | FixedRule | ScheduleRule
    policies: tuple | None = None  # policy of each mode, when modes are policies
    label: str = ""

    def __post_init__(self):
        A = np.ascontiguousarray(self.A, dtype=float)
        b = np.ascontiguousarray(self.b, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise InvalidInputError(f"A must have shape (M, n, n), got {A.shape}")
        if b.shape != A.shape[:2]:
            raise InvalidInputError(f"b must have shape {A.shape[:2]}, got {b.shape}")
        if isinstance(self.rule, FixedRule) and not 0 <= self.rule.mode < A.shape[0]:
            raise InvalidInputError(f"fixed mode {self.rule.mode} out of range")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def num_modes(self) -> int:
        return self.A.shape[0]

    def mode(self, x, t: float = 0.0) -> int:
        m = self.rule(t, np.asarray(x, float))
        if not 0 <= m < self.num_modes:
            raise InvalidInputError(f"switching rule returned mode {m} outside 0..{self.num_modes - 1}")
        return m

    def field(self, x, t: float = 0.0) -> np.ndarray:
        x = np.asarray(x, float)
        m = self.mode(x, t)
        return self.A[m] @ x + self.b[m]

    __call__ = field


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (N, n)
    modes: np.ndarray  # (N,)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def block(self, start: int, stop: int) -> "Trajectory":
        return Trajectory(self.times, self.states[:, start:stop], self.modes)

    def to_csv(self, path, stride: int = 1) -> None:
        """Write ``t, x_0, ..., x_{n-1}, mode`` rows; the last point is always kept."""
        rows = list(range(0, len(self.times), stride))
        if rows[-1] != len(self.times) - 1:
            rows.append(len(self.times) - 1)
        n = self.states.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x_{i}" for i in range(n)] + ["mode"])
            for k in rows:
                w.writerow([repr(float(self.times[k]))] + [repr(float(v)) for v in self.states[k]] + [int(self.modes[k])])


def read_trajectory_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [row for row in r]
    if header[0] != "t" or header[-1] != "mode":
        raise InvalidInputError(f"{path}: unexpected header {header}")
    arr = np.array([[float(v) for v in row[:-1]] for row in data])
    modes = np.array([int(row[-1]) for row in data])
    return Trajectory(arr[:, 0], arr[:, 1:], modes)


# --------------------------------------------------------------------- builders


def _mode_family(mdp: Mdp):
    P = stacked_transition(mdp)
    D = diag_distribution(mdp)
    pols = enumerate_policies(mdp.num_states, mdp.num_actions)
    pis = [policy_matrix(pi, mdp.num_states, mdp.num_actions) for pi in pols]
    return P, D, pols, pis


def build_q_ode(mdp: Mdp, q_star) -> SwitchedAffineSystem:
    """Q-learning ODE in the shifted coordinate ``x = Q - Q*``.

    For each policy: ``A = g D P Pi - D`` and ``b = g D P (Pi - Pi*) Q*``.
    """
    q_star = np.asarray(q_star, float)
    P, D, pols, pis = _mode_family(mdp)
    g = mdp.gamma
    pi_star = policy_matrix(greedy_policy(q_star, mdp.num_states, mdp.num_actions), mdp.num_states, mdp.num_actions)
    A = np.stack([g * D @ P @ Pi - D for Pi in pis])
    b = np.stack([g * D @ P @ (Pi - pi_star) @ q_star for Pi in pis])
    n = mdp.num_pairs
    rule = GreedyRule(mdp.num_states, mdp.num_actions, np.eye(n), q_star.copy())
    return SwitchedAffineSystem(A, b, rule, tuple(pols), "q")


def build_q_comparisons(mdp: Mdp, q_star) -> tuple[SwitchedAffineSystem, SwitchedAffineSystem]:
    """Upper system (greedy on ``x`` itself, no offset) and lower system (fixed optimal policy)."""
    q_star = np.asarray(q_star, float)
    P, D, pols, pis = _mode_family(mdp)
    g = mdp.gamma
    n = mdp.num_pairs
    A = np.stack([g * D @ P @ Pi - D for Pi in pis])
    upper = SwitchedAffineSystem(
        A, np.zeros((len(pols), n)), GreedyRule(mdp.num_states, mdp.num_actions, np.eye(n), np.zeros(n)), tuple(pols), "q-upper"
    )
    star = greedy_policy(q_star, mdp.num_states, mdp.num_actions)
    Pi = policy_matrix(star, mdp.num_states, mdp.num_actions)
    lower = SwitchedAffineSystem((g * D @ P @ Pi - D)[None], np.zeros((1, n)), FixedRule(0), (star,), "q-lower")
    return upper, lower


def _averaging_blocks(mdp: Mdp, delta: float, Pi) -> np.ndarray:
    P = stacked_transition(mdp)
    D = diag_distribution(mdp)
    n = mdp.num_pairs
    eye = np.eye(n)
    return np.block([[-D, mdp.gamma * D @ P @ Pi], [delta * eye, -delta * eye]])


def _check_delta(delta):
    if not delta > 0:
        raise InvalidInputError(f"delta must be positive, got {delta!r}")


def build_averaging_ode(mdp: Mdp, delta: float, q_star) -> SwitchedAffineSystem:
    """Averaging Q-learning ODE in ``x = [Q^A - Q*; Q^B - Q*]``; switching follows ``Q^B``."""
    _check_delta(delta)
    q_star = np.asarray(q_star, float)
    n = mdp.num_pairs
    P = stacked_transition(mdp)
    D = diag_distribution(mdp)
    pols = enumerate_policies(mdp.num_states, mdp.num_actions)
    pi_star = policy_matrix(greedy_policy(q_star, mdp.num_states, mdp.num_actions), mdp.num_states, mdp.num_actions)
    A, b = [], []
    for pi in pols:
        Pi = policy_matrix(pi, mdp.num_states, mdp.num_actions)
        A.append(_averaging_blocks(mdp, delta, Pi))
        b.append(np.concatenate([mdp.gamma * D @ P @ (Pi - pi_star) @ q_star, np.zeros(n)]))
    coord = np.hstack([np.zeros((n, n)), np.eye(n)])
    rule = GreedyRule(mdp.num_states, mdp.num_actions, coord, q_star.copy())
    return SwitchedAffineSystem(np.stack(A), np.stack(b), rule, tuple(pols), "avg")


def build_averaging_comparisons(mdp: Mdp, delta: float, q_star) -> tuple[SwitchedAffineSystem, SwitchedAffineSystem]:
    _check_delta(delta)
    q_star = np.asarray(q_star, float)
    n = mdp.num_pairs
    pols = enumerate_policies(mdp.num_states, mdp.num_actions)
    A = np.stack([_averaging_blocks(mdp, delta, policy_matrix(pi, mdp.num_states, mdp.num_actions)) for pi in pols])
    coord = np.hstack([np.zeros((n, n)), np.eye(n)])
    upper = SwitchedAffineSystem(
        A, np.zeros((len(pols), 2 * n)), GreedyRule(mdp.num_states, mdp.num_actions, coord, np.zeros(n)), tuple(pols), "avg-upper"
    )
    star = greedy_policy(q_star, mdp.num_states, mdp.num_actions)
    A_low = _averaging_blocks(mdp, delta, policy_matrix(star, mdp.num_states, mdp.num_actions))
    lower = SwitchedAffineSystem(A_low[None], np.zeros((1, 2 * n)), FixedRule(0), (star,), "avg-lower")
    return upper, lower


def build_lfa_ode(mdp: Mdp, phi, theta_star) -> SwitchedAffineSystem:
    """LFA Q-learning ODE in ``x = theta - theta*``.

    ``A = Phi^T (g D P Pi - D) Phi`` and ``b = g Phi^T D P (Pi - Pi*) Phi theta*``
    for every policy; only policies greedy for some ``Phi theta`` are ever active.
    """
    phi = np.asarray(phi, float)
    theta_star = np.asarray(theta_star, float)
    P, D, pols, pis = _mode_family(mdp)
    g = mdp.gamma
    q_star = phi @ theta_star
    pi_star = policy_matrix(greedy_policy(q_star, mdp.num_states, mdp.num_actions), mdp.num_states, mdp.num_actions)
    A = np.stack([phi.T @ (g * D @ P @ Pi - D) @ phi for Pi in pis])
    b = np.stack([g * phi.T @ D @ P @ (Pi - pi_star) @ q_star for Pi in pis])
    rule = GreedyRule(mdp.num_states, mdp.num_actions, phi.copy(), q_star.copy())
    return SwitchedAffineSystem(A, b, rule, tuple(pols), "lfa")


def build_lfa_comparisons(mdp: Mdp, phi, theta_star) -> tuple[SwitchedAffineSystem, SwitchedAffineSystem]:
    """Comparison systems for LFA; require nonnegative ``phi`` with orthogonal columns."""
    from .linear_fa import feature_flags

    phi = np.asarray(phi, float)
    flags = feature_flags(phi)
    if not (flags.nonnegative and flags.orthogonal):
        raise AssumptionError("LFA comparison systems need nonnegative features with orthogonal columns")
    P, D, pols, pis = _mode_family(mdp)
    g = mdp.gamma
    k = phi.shape[1]
    A = np.stack([phi.T @ (g * D @ P @ Pi - D) @ phi for Pi in pis])
    upper = SwitchedAffineSystem(
        A, np.zeros((len(pols), k)), GreedyRule(mdp.num_states, mdp.num_actions, phi.copy(), np.zeros(phi.shape[0])), tuple(pols), "lfa-upper"
    )
    star = greedy_policy(phi @ np.asarray(theta_star, float), mdp.num_states, mdp.num_actions)
    Pi = policy_matrix(star, mdp.num_states, mdp.num_actions)
    lower = SwitchedAffineSystem((phi.T @ (g * D @ P @ Pi - D) @ phi)[None], np.zeros((1, k)), FixedRule(0), (star,), "lfa-lower")
    return upper, lower


# ------------------------------------------------------------------ integration


def _rk4_python(sys: SwitchedAffineSystem, x0, dt, nsteps):
    n = sys.dim
    states = np.empty((nsteps + 1, n))
    modes = np.empty(nsteps + 1, dtype=np.int64)
    x = np.array(x0, float)
    states[0] = x

    def f(t, y):
        m = sys.mode(y, t)
        return sys.A[m] @ y + sys.b[m], m

    for step in range(nsteps):
        t = step * dt
        k1, modes[step] = f(t, x)
        k2, _ = f(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3, _ = f(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4, _ = f(t + dt, x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            return states, modes, step
        states[step + 1] = x
    modes[nsteps] = sys.mode(x, nsteps * dt)
    return states, modes, nsteps


def integrate(sys: SwitchedAffineSystem, x0, t_final: float | None = None, dt: float | None = None, backend: str = "auto") -> Trajectory:
    """Fixed-step RK4 from ``t = 0`` to ``t_final``.

    The mode is re-evaluated from the stage state at each of the four
    stages; the recorded mode of each point is the mode at that point.

    Parameters
    ----------
    backend : {"auto", "compiled", "python"}
        ``auto`` uses the compiled loop for greedy and fixed rules and the
        python loop for schedules.

    Raises
    ------
    BlowUpError
        If the state becomes non-finite.
    """
    t_final = DEFAULTS["t_final"] if t_final is None else t_final
    dt = DEFAULTS["dt"] if dt is None else dt
    if not (dt > 0 and t_final > 0):
        raise InvalidInputError("dt and t_final must be positive")
    x0 = np.array(x0, float).reshape(-1)
    if x0.shape != (sys.dim,):
        raise InvalidInputError(f"x0 has length {x0.size}, system dimension is {sys.dim}")
    nsteps = int(round(t_final / dt))
    rule = sys.rule
    if backend == "auto":
        backend = "python" if isinstance(rule, ScheduleRule) else "compiled"
    if backend == "compiled":
        if isinstance(rule, GreedyRule):
            C = np.ascontiguousarray(rule.coord, float)
            c = np.ascontiguousarray(rule.offset, float)
            S, nA, fixed = rule.num_states, rule.num_actions, -1
        elif isinstance(rule, FixedRule):
            C, c, S, nA, fixed = np.zeros((1, sys.dim)), np.zeros(1), 1, 1, rule.mode
        else:
            raise InvalidInputError("compiled backend does not support schedule rules")
        states, modes, done = _kernels.rk4_switched(sys.A, sys.b, C, c, S, nA, fixed, x0, float(dt), nsteps)
    elif backend == "python":
        states, modes, done = _rk4_python(sys, x0, dt, nsteps)
    else:
        raise InvalidInputError(f"unknown backend {backend!r}")
    if done < nsteps:
        raise BlowUpError(f"state became non-finite at step {done + 1} (t = {(done + 1) * dt:g})")
    times = np.arange(nsteps + 1) * dt
    return Trajectory(times, states, modes)
