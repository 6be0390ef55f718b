"""Pure-Python/numpy versions of the hot loops.

Semantics (and floating-point operation order, for dimensions below 8) match
the compiled ``_kernels`` extension exactly.
"""
import numpy as np


def viterbi(unary, arc, init_state):
    """Minimise ``sum_t unary[t, z_t] + sum_(t>=1) arc[z_(t-1), z_t]`` with ``z_0 = init_state``."""
    unary = np.asarray(unary, dtype=np.float64)
    arc = np.asarray(arc, dtype=np.float64)
    T, K = unary.shape
    cost = np.full(K, np.inf)
    cost[init_state] = unary[0, init_state]
    back = np.zeros((T, K), dtype=np.int64)
    cols = np.arange(K)
    for t in range(1, T):
        cand = cost[:, None] + arc
        arg = cand.argmin(axis=0)
        back[t] = arg
        cost = cand[arg, cols] + unary[t]
    path = np.empty(T, dtype=np.int64)
    path[T - 1] = int(cost.argmin())
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path


def hdp_assignment_sweep(X, groups, z, means, counts, group_counts, K, lambda1, lambda2, lambda3):
    """One in-place exact-delta reassignment pass over all observations.

    ``means``, ``counts`` and ``group_counts`` are buffers with room for at
    least ``K + n`` clusters. Returns ``(K, n_moved)``.
    """
    n = X.shape[0]
    moved = 0
    shrink = 1.0 + lambda3
    for j in range(n):
        x = X[j]
        i = groups[j]
        a = z[j]
        counts[a] -= 1
        group_counts[i, a] -= 1
        cost = ((means[:K] - x) ** 2).sum(axis=1)
        cost += lambda2 * (group_counts[i, :K] == 0)
        if counts[a] == 0:
            cost[a] += lambda1 + lambda3 * (means[a] * means[a]).sum()
        b = int(cost.argmin())
        new_cost = lambda3 / shrink * (x * x).sum() + lambda1 + lambda2
        fresh = new_cost < cost[b]
        if not fresh and b == a:
            counts[a] += 1
            group_counts[i, a] += 1
            continue
        if counts[a] == 0:
            means[a:K - 1] = means[a + 1:K]
            counts[a:K - 1] = counts[a + 1:K]
            group_counts[:, a:K - 1] = group_counts[:, a + 1:K]
            z[z > a] -= 1
            K -= 1
            if b > a:
                b -= 1
        if fresh:
            b = K
            means[K] = x / shrink
            counts[K] = 0
            group_counts[:, K] = 0
            K += 1
        counts[b] += 1
        group_counts[i, b] += 1
        z[j] = b
        moved += 1
    return K, moved
