"""Pure-numpy implementations of the hot dynamic-programming kernels.

Both kernels operate on the CSR-style sparse transition layout used by
``TabularMdp``: for the pair index ``m = s * num_actions + a`` the successor
states are ``succ[indptr[m]:indptr[m+1]]`` with probabilities
``prob[indptr[m]:indptr[m+1]]``.  Every (s, a) pair has at least one
successor (rows are full probability distributions), which lets the
segment reductions below use ``np.add.reduceat`` safely.
"""

import numpy as np
from scipy.special import logsumexp

BACKEND = "numpy"


def soft_value_iteration(reward, gamma, horizon, tol, indptr, succ, prob, num_actions):
    """Soft Bellman backups with log-sum-exp over actions.

    Per sweep: Q(s,a) = r(s) + gamma * sum_{s'} T(s,a,s') V(s'),
    V(s) = log sum_a exp Q(s,a).  Stops after `horizon` sweeps or when
    max |dV| < tol.  Returns (policy, value, sweeps) where
    policy(s,a) = exp(Q(s,a) - V(s)) uses the final sweep's Q.
    """
    num_states = reward.shape[0]
    v = np.zeros(num_states)
    q = np.tile(reward[:, None], (1, num_actions))
    starts = indptr[:-1]
    sweeps = 0
    for _ in range(horizon):
        ev = np.add.reduceat(prob * v[succ], starts)
        q = reward[:, None] + gamma * ev.reshape(num_states, num_actions)
        v_new = logsumexp(q, axis=1)
        delta = np.max(np.abs(v_new - v))
        v = v_new
        sweeps += 1
        if delta < tol:
            break
    policy = np.exp(q - v[:, None])
    return policy, v, sweeps


def propagate_visitation(p0, policy, horizon, indptr, succ, prob):
    """Forward occupancy propagation for `horizon` time steps.

    Returns per_step of shape (num_states, horizon) with per_step[:, 0] = p0
    and per_step[:, t] obtained by pushing per_step[:, t-1] through the
    policy-weighted transition kernel.
    """
    num_states = p0.shape[0]
    num_actions = policy.shape[1]
    per_step = np.empty((num_states, horizon))
    per_step[:, 0] = p0
    if horizon == 1:
        return per_step
    seg_len = np.diff(indptr)
    for t in range(1, horizon):
        flow_sa = (per_step[:, t - 1][:, None] * policy).reshape(num_states * num_actions)
        edge_flow = np.repeat(flow_sa, seg_len) * prob
        per_step[:, t] = np.bincount(succ, weights=edge_flow, minlength=num_states)
    return per_step
