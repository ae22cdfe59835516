# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled MWUM feasibility loop over simplex vertices.

Mirrors ``_kernel_py.run_mwum`` operation for operation; the two must stay
bitwise identical (same summation order, no fused multiply-add).
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor
from libc.stdint cimport uint64_t, int64_t, int32_t

cnp.import_array()

DEF RENORM_HIGH = 1e100
DEF RENORM_LOW = 1e-100
DEF TOL = 1e-12


cdef inline uint64_t _splitmix(uint64_t* state) nogil:
    cdef uint64_t z
    state[0] += <uint64_t>0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t* state) nogil:
    return <double>(_splitmix(state) >> 11) * (1.0 / 9007199254740992.0)


cdef inline double _eval(int64_t j, double sigma, const double[::1] r, const int64_t[::1] vself,
                         const int64_t[::1] vnext, const unsigned char[::1] vbud,
                         double[::1] p, int64_t b) nogil:
    cdef double mass = sigma / r[j]
    cdef double f = p[b]
    if vbud[j]:
        f = f - mass * p[b]
    else:
        f = f - mass * p[vself[j]]
    if vnext[j] >= 0:
        f = f + mass * p[vnext[j]]
    return f


def run_mwum(const double[::1] v_reward, const int64_t[::1] v_self, const int64_t[::1] v_next,
             const unsigned char[::1] v_budget, int64_t n_cons, int64_t budget_idx,
             double sigma, double ell, double eps, int64_t rounds,
             int mode, double threshold, double grid, double fail_prob,
             uint64_t seed, bint record):
    """Run up to ``rounds`` MWUM rounds; see ``_kernel_py.run_mwum`` for the contract."""
    cdef int64_t N = v_reward.shape[0]
    cdef cnp.ndarray[double, ndim=1] w_arr = np.ones(n_cons, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] p_arr = np.empty(n_cons, dtype=np.float64)
    cdef cnp.ndarray[int64_t, ndim=1] counts_arr = np.zeros(N, dtype=np.int64)
    cdef cnp.ndarray[int32_t, ndim=1] chosen_arr = np.empty(rounds if record else 0, dtype=np.int32)
    cdef cnp.ndarray[double, ndim=1] values_arr = np.empty(rounds if record else 0, dtype=np.float64)
    cdef double[::1] w = w_arr
    cdef double[::1] p = p_arr
    cdef int64_t[::1] counts = counts_arr
    cdef int32_t[::1] chosen = chosen_arr
    cdef double[::1] values = values_arr
    cdef uint64_t rng = seed
    cdef int64_t k, i, j, best_j, pick
    cdef double W, f, best, val, u1, u2, mass, rb, q
    cdef int64_t failures = 0
    cdef int status = 1
    cdef int64_t done = 0

    with nogil:
        for k in range(rounds):
            W = 0.0
            for i in range(n_cons):
                W = W + w[i]
            for i in range(n_cons):
                p[i] = w[i] / W
            best = 0.0
            best_j = -1
            for j in range(N):
                f = _eval(j, sigma, v_reward, v_self, v_next, v_budget, p, budget_idx)
                if best_j < 0 or f > best:
                    best = f
                    best_j = j
            if mode == 0:
                pick = best_j
                val = best
                if not (val >= threshold):
                    status = 0
                    done = k
                    break
            else:
                u1 = _uniform(&rng)
                u2 = _uniform(&rng)
                pick = best_j
                val = best
                if u1 < fail_prob:
                    pick = <int64_t>(u2 * N)
                    if pick >= N:
                        pick = N - 1
                    if pick != best_j:
                        failures += 1
                    val = _eval(pick, sigma, v_reward, v_self, v_next, v_budget, p, budget_idx)
                q = floor(val / grid) * grid
                if not (q >= -grid - TOL):
                    status = 0
                    done = k
                    break
            counts[pick] += 1
            if record:
                chosen[k] = <int32_t>pick
                values[k] = val
            mass = sigma / v_reward[pick]
            if v_budget[pick]:
                rb = 1.0 - mass
            else:
                rb = 1.0
            w[budget_idx] = w[budget_idx] * (1.0 - eps * (rb / ell))
            if not v_budget[pick]:
                w[v_self[pick]] = w[v_self[pick]] * (1.0 - eps * ((-mass) / ell))
            if v_next[pick] >= 0:
                w[v_next[pick]] = w[v_next[pick]] * (1.0 - eps * (mass / ell))
            W = 0.0
            for i in range(n_cons):
                W = W + w[i]
            if W > RENORM_HIGH or W < RENORM_LOW:
                for i in range(n_cons):
                    w[i] = w[i] / W
            done = k + 1

    cert = p_arr.copy() if status == 0 else None
    if record:
        chosen_arr = chosen_arr[:done]
        values_arr = values_arr[:done]
    return status, done, counts_arr, chosen_arr, values_arr, cert, failures, w_arr
