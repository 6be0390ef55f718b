"""Optimisers for the two HDP-HMM SVA objectives.

``fit_hmm_combinatorial`` minimises the distinct-transition objective by
single-position relabelling plus state merges. Means are always held at their
ridge optimum, so every move is scored by its exact change in the objective.

``fit_hmm_direct`` alternates Viterbi decoding, ridge means, closed-form
transition rows and closed-form shared weights for a fixed ``K``;
``fit_hmm_direct_sweep`` scans ``K`` over a range.
"""
from __future__ import annotations

import logging
from typing import Callable

import numpy as np

from . import kernels
from .hdp_means import FitOptions, init_state, ridge_means
from .objectives import (GroupedDataset, HmmDirectSolution, HmmSolution, Hyperparams, SequenceDataset,
                         hdp_hmm_direct_objective, transition_counts)

log = logging.getLogger(__name__)

Callback = Callable[[str, float], None]


def canonical_labels(states) -> np.ndarray:
    """Relabel states ``0, 1, ...`` by order of first appearance."""
    z = np.asarray(states, dtype=np.int64)
    _, first = np.unique(z, return_index=True)
    order = np.argsort(first)
    remap = np.empty(int(z.max()) + 1, dtype=np.int64)
    remap[np.unique(z)[order]] = np.arange(order.size)
    return remap[z]


# --------------------------------------------------------------------------
# combinatorial objective
# --------------------------------------------------------------------------


class _CombState:
    """Sufficient statistics of a labelling for the profile objective.

    ``cost`` equals the combinatorial objective evaluated at ridge-optimal means.
    """

    def __init__(self, Y, z, hp):
        self.Y = Y
        self.sq = np.einsum("ij,ij->i", Y, Y)
        self.hp = hp
        self.z = np.asarray(z, dtype=np.int64).copy()
        K = int(self.z.max()) + 1
        self.K = K
        self.n = np.bincount(self.z, minlength=K).astype(np.int64)
        self.S = np.zeros((K, Y.shape[1]))
        np.add.at(self.S, self.z, Y)
        self.Q = np.bincount(self.z, weights=self.sq, minlength=K)
        self.N = transition_counts(self.z, K)

    def _fit_cost(self, n, S, Q):
        if n == 0:
            return 0.0
        return Q - float(S @ S) / (n + self.hp.lambda3)

    def cost(self):
        hp = self.hp
        data = sum(self._fit_cost(self.n[k], self.S[k], self.Q[k]) for k in range(self.K))
        s = (self.N > 0).sum(axis=1)
        return data + hp.lambda1 * (self.K - 1) + hp.lambda2 * float(np.sum(s - 1))

    def _pairs(self, t, a):
        """Transitions touching position ``t`` as (source, dest) with ``a`` at ``t``."""
        T = self.z.size
        out = []
        if t > 0:
            out.append((int(self.z[t - 1]), a))
        if t < T - 1:
            out.append((a, int(self.z[t + 1])))
        return out

    def move_delta(self, t, b):
        """Exact objective change of setting ``z_t = b`` (``b == K`` opens a new state)."""
        hp = self.hp
        a = int(self.z[t])
        if b == a:
            return 0.0
        y, q = self.Y[t], self.sq[t]
        d = (self._fit_cost(self.n[a] - 1, self.S[a] - y, self.Q[a] - q) - self._fit_cost(self.n[a], self.S[a], self.Q[a]))
        if b < self.K:
            d += self._fit_cost(self.n[b] + 1, self.S[b] + y, self.Q[b] + q) - self._fit_cost(self.n[b], self.S[b], self.Q[b])
        else:
            d += self._fit_cost(1, y, q)
        a_dies = bool(self.n[a] == 1)
        dK = int(b == self.K) - int(a_dies)
        old_pairs = self._pairs(t, a)
        new_pairs = self._pairs(t, b)
        # a fresh state always gets a row: with no successor it contributes s - 1 = -1
        rows = {p[0] for p in old_pairs} | {p[0] for p in new_pairs} | {a, b}
        counts = {}
        for r in rows:
            counts[r] = self.N[r].copy() if r < self.K else np.zeros(self.K, dtype=np.int64)
        for r in counts:
            counts[r] = np.append(counts[r], 0)
        for src, dst in old_pairs:
            counts[src][dst] -= 1
        for src, dst in new_pairs:
            counts[src][dst] += 1
        before = sum(int((self.N[r] > 0).sum()) - 1 for r in rows if r < self.K)
        after = 0
        for r in rows:
            alive = (r != a or not a_dies)
            if alive:
                after += int((counts[r] > 0).sum()) - 1
        return d + hp.lambda1 * dK + hp.lambda2 * (after - before)

    def apply_move(self, t, b):
        a = int(self.z[t])
        y, q = self.Y[t], self.sq[t]
        if b == self.K:
            self.n = np.append(self.n, 0)
            self.S = np.vstack([self.S, np.zeros_like(y)])
            self.Q = np.append(self.Q, 0.0)
            N = np.zeros((self.K + 1, self.K + 1), dtype=np.int64)
            N[:self.K, :self.K] = self.N
            self.N = N
            self.K += 1
        for src, dst in self._pairs(t, a):
            self.N[src, dst] -= 1
        self.z[t] = b
        for src, dst in self._pairs(t, b):
            self.N[src, dst] += 1
        self.n[a] -= 1
        self.S[a] -= y
        self.Q[a] -= q
        self.n[b] += 1
        self.S[b] += y
        self.Q[b] += q
        if self.n[a] == 0:
            self._drop(a)

    def _drop(self, a):
        keep = np.arange(self.K) != a
        self.n, self.S, self.Q = self.n[keep], self.S[keep], self.Q[keep]
        self.N = self.N[np.ix_(keep, keep)]
        self.z[self.z > a] -= 1
        self.K -= 1

    def means(self):
        return self.S / (self.n + self.hp.lambda3)[:, None]


def comb_profile_objective(data: SequenceDataset, states, hp: Hyperparams) -> float:
    """Combinatorial objective with every mean at its ridge optimum, as a function of the labelling alone."""
    return _CombState(data.observations, canonical_labels(states), hp).cost()


def _tolerance(value):
    return 1e-10 * max(1.0, abs(value))


def _position_sweep(st):
    """Left-to-right single-position moves; only strict improvements are taken."""
    moved = 0
    current = st.cost()
    for t in range(st.z.size):
        a = int(st.z[t])
        best_b, best_d = a, 0.0
        # strict comparison: lowest index wins ties, a fresh state (b == K) loses them
        for b in range(st.K + 1):
            d = st.move_delta(t, b)
            if d < best_d:
                best_b, best_d = b, d
        if best_b != a and best_d < -_tolerance(current):
            st.apply_move(t, best_b)
            current += best_d
            moved += 1
    return moved


def _merge_pass(st, hp):
    """Greedily accept any pairwise state merge that lowers the objective."""
    accepted = 0
    current = st.cost()
    improved = True
    while improved:
        improved = False
        for a in range(st.K):
            for b in range(a + 1, st.K):
                cand = _CombState(st.Y, canonical_labels(np.where(st.z == b, a, st.z)), hp)
                c = cand.cost()
                if c < current - _tolerance(current):
                    st, current, improved = cand, c, True
                    accepted += 1
                    break
            if improved:
                break
    return st, accepted


def _fit_comb_once(Y, z0, hp, opts, callback):
    st = _CombState(Y, z0, hp)
    trace = []
    if callback:
        callback("init", st.cost())
    for rnd in range(opts.max_sweeps):
        moved = _position_sweep(st)
        st = _CombState(Y, canonical_labels(st.z), hp)
        trace.append(st.cost())
        if callback:
            callback("positions", trace[-1])
        st, merged = _merge_pass(st, hp)
        trace.append(st.cost())
        if callback:
            callback("merges", trace[-1])
        log.debug("round %d: K=%d moved=%d merged=%d objective=%.12g", rnd + 1, st.K, moved, merged, trace[-1])
        if moved == 0 and merged == 0:
            break
    return st, trace


def fit_hmm_combinatorial(data: SequenceDataset, hp: Hyperparams, opts: FitOptions = FitOptions(),
                          init_states=None, callback: Callback | None = None) -> tuple[HmmSolution, list[float]]:
    """Minimise the distinct-transition HDP-HMM objective.

    Each round sweeps positions left to right (moving ``z_t`` to any existing
    or a fresh state when that strictly lowers the objective) and then tries
    merging every pair of states. Stops after a round with no accepted move
    or ``opts.max_sweeps`` rounds. The trace holds the objective after every
    phase.

    The first start is a single state (or ``init_states`` when given);
    restarts ``r >= 1`` are seeded DP-means style from ``opts.seed + r``. The
    lowest final objective wins; ``callback`` sees every start.
    """
    Y = data.observations
    best = None
    for r in range(opts.restarts):
        if r == 0:
            z0 = np.zeros(data.length, dtype=np.int64) if init_states is None else canonical_labels(init_states)
        else:
            seeded = init_state(GroupedDataset([Y]), hp, FitOptions(init="kmeans++"), seed=opts.seed + r)
            z0 = canonical_labels(seeded.z)
        st, trace = _fit_comb_once(Y, z0, hp, opts, callback)
        if best is None or trace[-1] < best[1][-1]:
            best = (st, trace)
    st, trace = best
    return HmmSolution(st.z, st.means()), trace


# --------------------------------------------------------------------------
# direct objective
# --------------------------------------------------------------------------


def viterbi_path(unary_costs, arc_costs, initial_state: int = 0, backend: str | None = None) -> np.ndarray:
    """Exact minimiser of ``sum_t unary[t, z_t] + sum_(t>=1) arc[z_(t-1), z_t]`` with ``z_0`` fixed.

    Ties go to the smaller state index at every backtracking step.
    """
    unary = np.ascontiguousarray(unary_costs, dtype=np.float64)
    arc = np.ascontiguousarray(arc_costs, dtype=np.float64)
    if unary.ndim != 2 or arc.shape != (unary.shape[1], unary.shape[1]):
        raise ValueError(f"expected T x K unary and K x K arc costs, got {unary.shape} and {arc.shape}")
    if not (np.isfinite(unary).all() and np.isfinite(arc).all()):
        raise ValueError("costs must be finite")
    if not 0 <= initial_state < unary.shape[1]:
        raise ValueError(f"initial state {initial_state} out of range")
    impl = kernels.get_backend(backend) if backend else kernels
    return impl.viterbi(unary, arc, int(initial_state))


def update_transition_rows(transition_counts, shared_weights, hp: Hyperparams) -> np.ndarray:
    """Closed-form transition rows ``pi_ij = (zeta n_ij + lambda2 beta_j) / (zeta n_i. + lambda2)``.

    The remainder column ``K+1`` receives no transitions. This is the unique
    minimiser of ``-zeta sum_j n_ij log pi_ij + lambda2 KL(beta || pi_i)``.
    """
    n = np.asarray(transition_counts, dtype=np.float64)
    beta = np.asarray(shared_weights, dtype=np.float64)
    K = n.shape[0]
    if n.shape != (K, K) or beta.shape != (K + 1,):
        raise ValueError(f"expected K x K counts and K+1 weights, got {n.shape} and {beta.shape}")
    if not (beta > 0).all():
        raise ValueError("shared weights must be strictly positive")
    num = hp.lambda2 * np.broadcast_to(beta, (K, K + 1)).copy()
    num[:, :K] += hp.zeta * n
    return num / num.sum(axis=1, keepdims=True)


def update_shared_weights(rows) -> np.ndarray:
    """Minimiser of ``sum_i KL(beta || pi_i)``: the normalised geometric mean of the rows."""
    pi = np.asarray(rows, dtype=np.float64)
    if not (pi > 0).all():
        raise ValueError("transition rows must be strictly positive")
    g = np.log(pi).mean(axis=0)
    w = np.exp(g - g.max())
    return w / w.sum()


def _unary(Y, means):
    return ((Y[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)


def _direct_means(Y, z, old, lambda3):
    K = old.shape[0]
    new = ridge_means(Y, z, K, lambda3)
    unused = np.bincount(z, minlength=K) == 0
    if lambda3 == 0:
        new[unused] = old[unused]
    return new


def _seeded_labels(Y, K, rng):
    """k-means++ style seeding: ``K`` centers drawn in proportion to squared distance, nearest-center labels."""
    T = Y.shape[0]
    centers = [Y[rng.integers(T)]]
    d2 = ((Y - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, K):
        if d2.sum() == 0:
            break
        c = Y[rng.choice(T, p=d2 / d2.sum())]
        centers.append(c)
        d2 = np.minimum(d2, ((Y - c) ** 2).sum(axis=1))
    z = _unary(Y, np.array(centers)).argmin(axis=1)
    return canonical_labels(z)


def _fit_direct_once(data, hp, K, opts, z, backend, callback):
    Y = data.observations
    means = _direct_means(Y, z, np.zeros((K, data.dim)), hp.lambda3)
    pi = np.full((K, K + 1), 1.0 / (K + 1))
    beta = np.full(K + 1, 1.0 / (K + 1))

    def objective():
        return hdp_hmm_direct_objective(data, HmmDirectSolution(z, means, pi, beta), hp)

    prev = objective()
    if callback:
        callback("init", prev)
    trace = []
    for rnd in range(opts.max_sweeps):
        z = viterbi_path(_unary(Y, means), -hp.zeta * np.log(pi[:, :K]), 0, backend)
        if callback:
            callback("states", objective())
        means = _direct_means(Y, z, means, hp.lambda3)
        if callback:
            callback("means", objective())
        pi = update_transition_rows(transition_counts(z, K), beta, hp)
        if callback:
            callback("rows", objective())
        beta = update_shared_weights(pi)
        cur = objective()
        if callback:
            callback("weights", cur)
        trace.append(cur)
        log.debug("round %d: objective=%.12g", rnd + 1, cur)
        if prev - cur < opts.tol:
            break
        prev = cur
    return HmmDirectSolution(z, means, pi, beta), trace


def fit_hmm_direct(data: SequenceDataset, hp: Hyperparams, K: int, opts: FitOptions = FitOptions(),
                   backend: str | None = None,
                   callback: Callback | None = None) -> tuple[HmmDirectSolution, list[float]]:
    """Alternating minimisation of the direct HDP-HMM objective for a fixed number of states.

    The first start uses ``K`` contiguous equal blocks with uniform rows and
    weights; further restarts (``opts.restarts > 1``) seed the states
    k-means++ style from ``opts.seed + r``. Each round runs Viterbi, ridge
    means, transition rows and shared weights in turn. The trace records the
    objective after every round; ``callback`` sees every phase. The lowest
    final objective over all starts is returned.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    T = data.length
    best = None
    for r in range(opts.restarts):
        if r == 0:
            z = (np.arange(T) * K // T).astype(np.int64)
        else:
            z = _seeded_labels(data.observations, K, np.random.default_rng(opts.seed + r))
        sol, trace = _fit_direct_once(data, hp, K, opts, z, backend, callback)
        if best is None or trace[-1] < best[1][-1]:
            best = (sol, trace)
    return best


def fit_hmm_direct_sweep(data: SequenceDataset, hp: Hyperparams, k_min: int = 1, k_max: int = 10,
                         opts: FitOptions = FitOptions(), backend: str | None = None
                         ) -> tuple[HmmDirectSolution, list[float], dict[int, float]]:
    """Fit every ``K`` in ``[k_min, k_max]`` and keep the lowest direct objective.

    Returns the best solution, its trace and the final objective for each ``K``.
    """
    if not 1 <= k_min <= k_max:
        raise ValueError(f"need 1 <= k_min <= k_max, got {k_min}, {k_max}")
    best, scores = None, {}
    for K in range(k_min, k_max + 1):
        sol, trace = fit_hmm_direct(data, hp, K, opts, backend)
        scores[K] = trace[-1]
        if best is None or trace[-1] < best[1][-1]:
            best = (sol, trace)
    return best[0], best[1], scores
