"""Compiled inner loops. Each has a pure-numpy twin elsewhere used as its test oracle."""

import numpy as np
from numba import njit


@njit(cache=True)
def greedy_mode(q, num_states, num_actions):
    idx = 0
    for s in range(num_states):
        best = q[s]
        arg = 0
        for a in range(1, num_actions):
            v = q[a * num_states + s]
            if v > best:
                best = v
                arg = a
        idx = idx * num_actions + arg
    return idx


@njit(cache=True)
def _field(A, b, C, c, num_states, num_actions, fixed, x, out):
    n = x.shape[0]
    if fixed >= 0:
        m = fixed
    else:
        q = C @ x + c
        m = greedy_mode(q, num_states, num_actions)
    Am = A[m]
    for i in range(n):
        acc = b[m, i]
        for j in range(n):
            acc += Am[i, j] * x[j]
        out[i] = acc
    return m


@njit(cache=True)
def rk4_switched(A, b, C, c, num_states, num_actions, fixed, x0, dt, nsteps):
    """Classical RK4 with the mode re-evaluated at every stage.

    Returns states, modes (mode of each recorded point) and the number of
    completed steps; fewer than ``nsteps`` means the state became non-finite.
    """
    n = x0.shape[0]
    states = np.empty((nsteps + 1, n))
    modes = np.empty(nsteps + 1, dtype=np.int64)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    x = x0.copy()
    states[0] = x
    for step in range(nsteps):
        modes[step] = _field(A, b, C, c, num_states, num_actions, fixed, x, k1)
        for i in range(n):
            tmp[i] = x[i] + 0.5 * dt * k1[i]
        _field(A, b, C, c, num_states, num_actions, fixed, tmp, k2)
        for i in range(n):
            tmp[i] = x[i] + 0.5 * dt * k2[i]
        _field(A, b, C, c, num_states, num_actions, fixed, tmp, k3)
        for i in range(n):
            tmp[i] = x[i] + dt * k3[i]
        _field(A, b, C, c, num_states, num_actions, fixed, tmp, k4)
        ok = True
        for i in range(n):
            x[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not np.isfinite(x[i]):
                ok = False
        if not ok:
            return states, modes, step
        states[step + 1] = x
    modes[nsteps] = _field(A, b, C, c, num_states, num_actions, fixed, x, k1)
    return states, modes, nsteps


@njit(cache=True)
def q_learning_chunk(q, idx, snext, r, k_start, scale, offset, exponent, gamma, num_states, num_actions):
    for t in range(idx.shape[0]):
        alpha = scale / (k_start + t + offset + 1.0) ** exponent
        i = idx[t]
        sp = snext[t]
        m = q[sp]
        for a in range(1, num_actions):
            v = q[a * num_states + sp]
            if v > m:
                m = v
        q[i] = q[i] + alpha * (r[t] + gamma * m - q[i])


@njit(cache=True)
def averaging_chunk(qa, qb, idx, snext, r, k_start, scale, offset, exponent, gamma, delta, num_states, num_actions):
    n = qa.shape[0]
    for t in range(idx.shape[0]):
        alpha = scale / (k_start + t + offset + 1.0) ** exponent
        i = idx[t]
        sp = snext[t]
        m = qb[sp]
        for a in range(1, num_actions):
            v = qb[a * num_states + sp]
            if v > m:
                m = v
        new_ai = qa[i] + alpha * (r[t] + gamma * m - qa[i])
        for j in range(n):
            qb[j] = qb[j] + alpha * delta * (qa[j] - qb[j])
        qa[i] = new_ai


@njit(cache=True)
def lfa_chunk(theta, phi, idx, snext, r, k_start, scale, offset, exponent, gamma, num_states, num_actions):
    nf = theta.shape[0]
    for t in range(idx.shape[0]):
        alpha = scale / (k_start + t + offset + 1.0) ** exponent
        i = idx[t]
        sp = snext[t]
        m = -np.inf
        for a in range(num_actions):
            row = a * num_states + sp
            v = 0.0
            for j in range(nf):
                v += phi[row, j] * theta[j]
            if v > m:
                m = v
        cur = 0.0
        for j in range(nf):
            cur += phi[i, j] * theta[j]
        td = r[t] + gamma * m - cur
        for j in range(nf):
            theta[j] = theta[j] + phi[i, j] * alpha * td
