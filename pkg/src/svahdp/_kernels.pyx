# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops; see ``_kernels_py`` for the reference semantics."""
import numpy as np

from libc.math cimport INFINITY


def viterbi(unary, arc, Py_ssize_t init_state):
    cdef double[:, ::1] u = np.ascontiguousarray(unary, dtype=np.float64)
    cdef double[:, ::1] w = np.ascontiguousarray(arc, dtype=np.float64)
    cdef Py_ssize_t T = u.shape[0], K = u.shape[1]
    cdef Py_ssize_t t, j, k, arg
    cdef double best, v
    prev_arr = np.full(K, INFINITY)
    cur_arr = np.empty(K)
    back_arr = np.zeros((T, K), dtype=np.int64)
    path_arr = np.empty(T, dtype=np.int64)
    cdef double[::1] prev = prev_arr
    cdef double[::1] cur = cur_arr
    cdef long long[:, ::1] back = back_arr
    cdef long long[::1] path = path_arr
    prev[init_state] = u[0, init_state]
    for t in range(1, T):
        for k in range(K):
            best = prev[0] + w[0, k]
            arg = 0
            for j in range(1, K):
                v = prev[j] + w[j, k]
                if v < best:
                    best = v
                    arg = j
            back[t, k] = arg
            cur[k] = best + u[t, k]
        for k in range(K):
            prev[k] = cur[k]
    arg = 0
    for k in range(1, K):
        if prev[k] < prev[arg]:
            arg = k
    path[T - 1] = arg
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path_arr


def hdp_assignment_sweep(double[:, ::1] X, long long[::1] groups, long long[::1] z,
                         double[:, ::1] means, long long[::1] counts,
                         long long[:, ::1] group_counts, Py_ssize_t K,
                         double lambda1, double lambda2, double lambda3):
    cdef Py_ssize_t n = X.shape[0], D = X.shape[1], N = group_counts.shape[0]
    cdef Py_ssize_t j, i, a, b, k, d, r, moved = 0
    cdef double shrink = 1.0 + lambda3
    cdef double c, diff, best, new_cost, sq
    cdef bint fresh
    for j in range(n):
        i = groups[j]
        a = z[j]
        counts[a] -= 1
        group_counts[i, a] -= 1
        b = -1
        best = INFINITY
        for k in range(K):
            c = 0.0
            for d in range(D):
                diff = means[k, d] - X[j, d]
                c += diff * diff
            if group_counts[i, k] == 0:
                c += lambda2
            if k == a and counts[a] == 0:
                sq = 0.0
                for d in range(D):
                    sq += means[a, d] * means[a, d]
                c += lambda1 + lambda3 * sq
            if c < best:
                best = c
                b = k
        sq = 0.0
        for d in range(D):
            sq += X[j, d] * X[j, d]
        new_cost = lambda3 / shrink * sq + lambda1 + lambda2
        fresh = new_cost < best
        if not fresh and b == a:
            counts[a] += 1
            group_counts[i, a] += 1
            continue
        if counts[a] == 0:
            for k in range(a, K - 1):
                for d in range(D):
                    means[k, d] = means[k + 1, d]
                counts[k] = counts[k + 1]
                for r in range(N):
                    group_counts[r, k] = group_counts[r, k + 1]
            for r in range(n):
                if z[r] > a:
                    z[r] -= 1
            K -= 1
            if b > a:
                b -= 1
        if fresh:
            b = K
            for d in range(D):
                means[K, d] = X[j, d] / shrink
            counts[K] = 0
            for r in range(N):
                group_counts[r, K] = 0
            K += 1
        counts[b] += 1
        group_counts[i, b] += 1
        z[j] = b
        moved += 1
    return K, moved
