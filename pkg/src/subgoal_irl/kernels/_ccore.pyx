# Compiled counterparts of the kernels in ``_npcore``; same contracts,
# same sparse CSR transition layout, plain loops instead of segment ops.

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log

cnp.import_array()

BACKEND = "cython"


def soft_value_iteration(double[::1] reward, double gamma, int horizon, double tol,
                         long long[::1] indptr, long long[::1] succ, double[::1] prob,
                         int num_actions):
    cdef int num_states = reward.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v_arr = np.zeros(num_states)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] q_arr = np.empty((num_states, num_actions))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pol_arr = np.empty((num_states, num_actions))
    cdef double[::1] v = v_arr
    cdef double[:, ::1] q = q_arr
    cdef double[:, ::1] pol = pol_arr
    cdef int s, a, sweeps
    cdef long long m, e
    cdef double ev, qmax, acc, v_new, delta
    q_arr[:] = 0.0

    sweeps = 0
    while sweeps < horizon:
        delta = 0.0
        for s in range(num_states):
            # Q for every action of s from the current V
            for a in range(num_actions):
                m = <long long> s * num_actions + a
                ev = 0.0
                for e in range(indptr[m], indptr[m + 1]):
                    ev += prob[e] * v[succ[e]]
                q[s, a] = reward[s] + gamma * ev
        for s in range(num_states):
            # log-sum-exp with max subtraction; never overflows
            qmax = q[s, 0]
            for a in range(1, num_actions):
                if q[s, a] > qmax:
                    qmax = q[s, a]
            acc = 0.0
            for a in range(num_actions):
                acc += exp(q[s, a] - qmax)
            v_new = qmax + log(acc)
            if fabs(v_new - v[s]) > delta:
                delta = fabs(v_new - v[s])
            v[s] = v_new
        sweeps += 1
        if delta < tol:
            break

    for s in range(num_states):
        for a in range(num_actions):
            pol[s, a] = exp(q[s, a] - v[s])
    return pol_arr, v_arr, sweeps


def propagate_visitation(double[::1] p0, double[:, ::1] policy, int horizon,
                         long long[::1] indptr, long long[::1] succ, double[::1] prob):
    cdef int num_states = p0.shape[0]
    cdef int num_actions = policy.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] per_step_arr = np.zeros((num_states, horizon))
    cdef double[:, ::1] per_step = per_step_arr
    cdef int s, a, t
    cdef long long m, e
    cdef double flow

    for s in range(num_states):
        per_step[s, 0] = p0[s]
    for t in range(1, horizon):
        for s in range(num_states):
            if per_step[s, t - 1] == 0.0:
                continue
            for a in range(num_actions):
                flow = per_step[s, t - 1] * policy[s, a]
                if flow == 0.0:
                    continue
                m = <long long> s * num_actions + a
                for e in range(indptr[m], indptr[m + 1]):
                    per_step[succ[e], t] += flow * prob[e]
    return per_step_arr
