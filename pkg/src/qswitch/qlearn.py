"""Stochastic Q-learning variants under i.i.d. state-action sampling.

Random streams come from numpy's counter-based ``Philox`` bit generator
seeded with ``SeedSequence(seed)``; independent trials use
``SeedSequence([seed, trial])``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .config import DEFAULTS
from .errors import BlowUpError, InvalidInputError
from .mdp import Mdp, diag_distribution, greedy_max, stacked_transition

ALGORITHMS = ("q", "avgq", "lfa")
_CHUNK = 1 << 18


def make_rng(seed: int, trial: int | None = None) -> np.random.Generator:
    key = seed if trial is None else [seed, trial]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


@dataclass(frozen=True)
class StepSizeSchedule:
    """``alpha_k = scale / (k + offset + 1) ** exponent`` with exponent in (0.5, 1]."""

    scale: float = DEFAULTS["alpha_scale"]
    offset: float = DEFAULTS["alpha_offset"]
    exponent: float = DEFAULTS["alpha_exponent"]

    def __post_init__(self):
        if not self.scale > 0:
            raise InvalidInputError("step-size scale must be positive")
        if not self.offset >= 0:
            raise InvalidInputError("step-size offset must be nonnegative")
        if not 0.5 < self.exponent <= 1.0:
            raise InvalidInputError(f"exponent {self.exponent!r} outside (0.5, 1]: Robbins-Monro fails")

    def __call__(self, k: int) -> float:
        return self.scale / (k + self.offset + 1.0) ** self.exponent


class Transition(NamedTuple):
    s: int
    a: int
    s_next: int
    r: float


@dataclass
class RunRecord:
    seed: int
    algorithm: str
    iterations: int
    log_k: list[int] = field(default_factory=list)
    errors: list[float] = field(default_factory=list)
    final: np.ndarray | None = None
    schedule: StepSizeSchedule | None = None

    @property
    def final_error(self) -> float:
        return self.errors[-1]

    def to_dict(self) -> dict:
        out = {
            "seed": self.seed,
            "algorithm": self.algorithm,
            "iterations": self.iterations,
            "log": [{"k": k, "error": e} for k, e in zip(self.log_k, self.errors)],
            "final": [] if self.final is None else self.final.tolist(),
        }
        if self.schedule is not None:
            out["schedule"] = {"scale": self.schedule.scale, "offset": self.schedule.offset, "exponent": self.schedule.exponent}
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def sample_batch(mdp: Mdp, rng: np.random.Generator, size: int, noise_std: float = 0.0):
    """Draw ``size`` i.i.d. transitions; returns pair indices, next states and rewards."""
    idx = rng.choice(mdp.num_pairs, size=size, p=mdp.dist)
    cum = np.cumsum(stacked_transition(mdp), axis=1)
    u = rng.random(size)
    snext = np.minimum((u[:, None] >= cum[idx]).sum(axis=1), mdp.num_states - 1)
    r = mdp.reward_vector[idx]
    if noise_std > 0:
        r = r + noise_std * rng.standard_normal(size)
    return idx.astype(np.int64), snext.astype(np.int64), np.asarray(r, float)


def sample_transition(mdp: Mdp, rng: np.random.Generator, noise_std: float = 0.0) -> Transition:
    """One ``(s, a, s', r)`` draw with ``(s, a) ~ d`` and ``s' ~ P_a(s, .)``."""
    idx, snext, r = sample_batch(mdp, rng, 1, noise_std)
    a, s = divmod(int(idx[0]), mdp.num_states)
    return Transition(s, a, int(snext[0]), float(r[0]))


def _target_max(q, s_next, num_states):
    return np.max(np.asarray(q)[s_next::num_states])


def q_learning_step(q, sample: Transition, alpha: float, gamma: float, num_states: int) -> np.ndarray:
    i = sample.a * num_states + sample.s
    out = np.array(q, dtype=float)
    out[i] = out[i] + alpha * (sample.r + gamma * _target_max(q, sample.s_next, num_states) - out[i])
    return out


def averaging_q_learning_step(qa, qb, sample: Transition, alpha: float, delta: float, gamma: float, num_states: int):
    qa = np.asarray(qa, float)
    qb = np.asarray(qb, float)
    i = sample.a * num_states + sample.s
    new_a = qa.copy()
    new_a[i] = qa[i] + alpha * (sample.r + gamma * _target_max(qb, sample.s_next, num_states) - qa[i])
    new_b = qb + alpha * delta * (qa - qb)
    return new_a, new_b


def lfa_q_learning_step(theta, phi, sample: Transition, alpha: float, gamma: float, num_states: int) -> np.ndarray:
    phi = np.asarray(phi, float)
    theta = np.asarray(theta, float)
    i = sample.a * num_states + sample.s
    q = phi @ theta
    td = sample.r + gamma * _target_max(q, sample.s_next, num_states) - q[i]
    return theta + phi[i] * alpha * td


def log_grid(iterations: int, points: int = 60) -> np.ndarray:
    """Geometric grid of iteration counts ending at ``iterations``."""
    if iterations < 1:
        raise InvalidInputError("iterations must be positive")
    grid = np.unique(np.round(np.geomspace(1, iterations, num=points)).astype(np.int64))
    return grid


def run(
    algorithm: str,
    mdp: Mdp,
    reference,
    iterations: int | None = None,
    seed: int | None = None,
    schedule: StepSizeSchedule | None = None,
    phi=None,
    delta: float | None = None,
    noise_std: float = 0.0,
    init=None,
    log_points: int = 60,
    backend: str = "compiled",
) -> RunRecord:
    """Seeded run of one algorithm, logging ``||iterate - reference||_inf``.

    Parameters
    ----------
    algorithm : {"q", "avgq", "lfa"}
    reference : array
        ``Q*`` for ``q``, ``theta*`` for ``lfa``; for ``avgq`` either ``Q*``
        or the stacked ``(Q*, Q*)``.
    init : array, optional
        Initial iterate (zeros by default); for ``avgq`` the stacked pair.
    backend : {"compiled", "python"}
        ``python`` steps through the public step functions on the same
        sample stream and exists to cross-check the compiled loop.
    """
    if algorithm not in ALGORITHMS:
        raise InvalidInputError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    iterations = DEFAULTS["iterations"] if iterations is None else int(iterations)
    seed = DEFAULTS["seed"] if seed is None else seed
    schedule = StepSizeSchedule() if schedule is None else schedule
    delta = DEFAULTS["delta"] if delta is None else delta
    S, nA, n = mdp.num_states, mdp.num_actions, mdp.num_pairs
    reference = np.asarray(reference, float)
    if algorithm == "lfa":
        if phi is None:
            raise InvalidInputError("lfa needs a feature matrix")
        phi = np.ascontiguousarray(phi, float)
        dim = phi.shape[1]
    elif algorithm == "avgq":
        if not delta > 0:
            raise InvalidInputError("delta must be positive")
        dim = 2 * n
        if reference.shape == (n,):
            reference = np.concatenate([reference, reference])
    else:
        dim = n
    if reference.shape != (dim,):
        raise InvalidInputError(f"reference has shape {reference.shape}, expected ({dim},)")
    x = np.zeros(dim) if init is None else np.array(init, float).reshape(dim)

    rng = make_rng(seed)
    record = RunRecord(seed, algorithm, iterations, schedule=schedule)
    grid = log_grid(iterations, log_points)
    done = 0
    for target in grid:
        while done < target:
            size = int(min(_CHUNK, target - done))
            idx, snext, r = sample_batch(mdp, rng, size, noise_std)
            _advance(algorithm, x, idx, snext, r, done, schedule, mdp.gamma, delta, S, nA, n, phi, backend)
            done += size
        if not np.all(np.isfinite(x)):
            raise BlowUpError(f"{algorithm} iterate became non-finite by iteration {done}")
        record.log_k.append(int(done))
        record.errors.append(float(np.max(np.abs(x - reference))))
    record.final = x.copy()
    return record


def _advance(algorithm, x, idx, snext, r, k_start, sched, gamma, delta, S, nA, n, phi, backend):
    if backend == "compiled":
        args = (float(k_start), float(sched.scale), float(sched.offset), float(sched.exponent), float(gamma))
        if algorithm == "q":
            _kernels.q_learning_chunk(x, idx, snext, r, *args, S, nA)
        elif algorithm == "avgq":
            qa, qb = x[:n], x[n:]
            _kernels.averaging_chunk(qa, qb, idx, snext, r, *args, float(delta), S, nA)
        else:
            _kernels.lfa_chunk(x, phi, idx, snext, r, *args, S, nA)
        return
    if backend != "python":
        raise InvalidInputError(f"unknown backend {backend!r}")
    for t in range(len(idx)):
        a, s = divmod(int(idx[t]), S)
        sample = Transition(s, a, int(snext[t]), float(r[t]))
        alpha = sched(k_start + t)
        if algorithm == "q":
            x[:] = q_learning_step(x, sample, alpha, gamma, S)
        elif algorithm == "avgq":
            qa, qb = averaging_q_learning_step(x[:n], x[n:], sample, alpha, delta, gamma, S)
            x[:n], x[n:] = qa, qb
        else:
            x[:] = lfa_q_learning_step(x, phi, sample, alpha, gamma, S)


def expected_drift(mdp: Mdp, q) -> np.ndarray:
    """``D R + g D P Pi_{pi_Q} Q - D Q``, the mean one-sample update direction."""
    q = np.asarray(q, float)
    D = diag_distribution(mdp)
    v = greedy_max(q, mdp.num_states, mdp.num_actions)
    return D @ mdp.reward_vector + mdp.gamma * D @ stacked_transition(mdp) @ v - D @ q


def td_noise(mdp: Mdp, q, sample: Transition) -> np.ndarray:
    """Martingale-difference noise: observed update direction minus the expected drift."""
    q = np.asarray(q, float)
    S = mdp.num_states
    i = sample.a * S + sample.s
    direction = np.zeros(mdp.num_pairs)
    direction[i] = sample.r + mdp.gamma * _target_max(q, sample.s_next, S) - q[i]
    return direction - expected_drift(mdp, q)


def td_noise_batch(mdp: Mdp, q, idx, snext, r) -> np.ndarray:
    """Vectorized :func:`td_noise` over a batch; returns shape ``(len(idx), |S||A|)``."""
    q = np.asarray(q, float)
    S, nA = mdp.num_states, mdp.num_actions
    table = q.reshape(nA, S)
    td = r + mdp.gamma * table[:, snext].max(axis=0) - q[idx]
    out = np.zeros((len(idx), mdp.num_pairs))
    out[np.arange(len(idx)), idx] = td
    return out - expected_drift(mdp, q)


def td_noise_std(mdp: Mdp, q) -> np.ndarray:
    """Exact per-component standard deviation of :func:`td_noise` for noiseless rewards.

    Computed by enumerating every ``(s, a, s')`` outcome with its probability.
    """
    q = np.asarray(q, float)
    S = mdp.num_states
    P = stacked_transition(mdp)
    second = np.zeros(mdp.num_pairs)
    for i in range(mdp.num_pairs):
        a, s = divmod(i, S)
        for sp in range(S):
            p = mdp.dist[i] * P[i, sp]
            if p == 0:
                continue
            eps = td_noise(mdp, q, Transition(s, a, sp, float(mdp.reward_vector[i])))
            second += p * eps**2
    return np.sqrt(second)


def td_noise_mean_bound(mdp: Mdp, q, num_samples: int, z: float = 5.0) -> float:
    """CLT-scale bound ``z * max_i sd(eps_i) / sqrt(N)`` on the max norm of the sample mean of noise.

    The per-component standard deviations come from :func:`td_noise_std`,
    so the bound scales with the size of the update direction at ``q``.
    """
    if num_samples < 1:
        raise InvalidInputError("num_samples must be positive")
    return float(z * td_noise_std(mdp, q).max() / np.sqrt(num_samples))
