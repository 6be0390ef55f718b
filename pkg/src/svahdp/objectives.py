"""SVA objective functions for HDP mixtures and the HDP-HMM.

Cluster and state labels are 0-based throughout: a clustering with ``K``
global clusters uses labels ``0..K-1`` and an HMM state sequence starts in
state ``0``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Hyperparams:
    """Free parameters of the SVA objectives.

    ``precision_scale`` is ``1 / (2 sigma^2)``; only the limit checks use it.
    """

    lambda1: float
    lambda2: float
    lambda3: float = 0.0
    zeta: float = 1.0
    precision_scale: float = 1.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "zeta", "precision_scale"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if not (self.lambda3 >= 0 and math.isfinite(self.lambda3)):
            raise ValueError(f"lambda3 must be non-negative and finite, got {self.lambda3}")

    @property
    def sigma2(self) -> float:
        return 0.5 / self.precision_scale

    @property
    def sigma0_sq(self) -> float:
        """Prior variance of the means, ``sigma^2 / lambda3`` (infinite when ``lambda3 = 0``)."""
        return self.sigma2 / self.lambda3 if self.lambda3 > 0 else math.inf


def _as_matrix(x, name):
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"{name} must be a list of vectors")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite values")
    return a


@dataclass(frozen=True)
class GroupedDataset:
    """``N`` groups of real vectors sharing one dimension ``D``."""

    groups: tuple

    def __init__(self, groups: Sequence):
        arrs = tuple(_as_matrix(g, f"group {i}") for i, g in enumerate(groups))
        if not arrs:
            raise ValueError("at least one group is required")
        dims = {a.shape[1] for a in arrs}
        if len(dims) != 1:
            raise ValueError(f"all observations must share one dimension, got {sorted(dims)}")
        for i, a in enumerate(arrs):
            if a.shape[0] == 0:
                raise ValueError(f"group {i} is empty")
        object.__setattr__(self, "groups", arrs)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def dim(self) -> int:
        return self.groups[0].shape[1]

    @property
    def sizes(self) -> list[int]:
        return [g.shape[0] for g in self.groups]

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """All observations as one array, with the group index of each row."""
        X = np.ascontiguousarray(np.vstack(self.groups))
        g = np.repeat(np.arange(self.n_groups, dtype=np.int64), self.sizes)
        return X, g


@dataclass(frozen=True)
class SequenceDataset:
    """``T`` ordered real vectors of dimension ``D``."""

    observations: np.ndarray

    def __init__(self, observations):
        a = _as_matrix(observations, "observations")
        if a.shape[0] == 0:
            raise ValueError("sequence must contain at least one observation")
        object.__setattr__(self, "observations", np.ascontiguousarray(a))

    @property
    def length(self) -> int:
        return self.observations.shape[0]

    @property
    def dim(self) -> int:
        return self.observations.shape[1]


def _check_labels_used(labels, K, what):
    used = np.zeros(K, dtype=bool)
    used[labels] = True
    if not used.all():
        raise ValueError(f"{what} {np.flatnonzero(~used).tolist()} are not used")


@dataclass(frozen=True)
class GroupedClustering:
    assignments: tuple
    means: np.ndarray

    def __init__(self, assignments: Sequence, means):
        z = tuple(np.asarray(a, dtype=np.int64) for a in assignments)
        mu = _as_matrix(means, "means")
        K = mu.shape[0]
        flat = np.concatenate(z) if z else np.zeros(0, dtype=np.int64)
        if K < 1 or flat.size == 0:
            raise ValueError("a clustering needs at least one cluster and one observation")
        if flat.min() < 0 or flat.max() >= K:
            raise ValueError(f"labels must lie in 0..{K - 1}")
        _check_labels_used(flat, K, "global clusters")
        object.__setattr__(self, "assignments", z)
        object.__setattr__(self, "means", mu)

    @property
    def K(self) -> int:
        return self.means.shape[0]


def _canonical_ok(states):
    seen = -1
    for s in states:
        if s > seen + 1:
            return False
        seen = max(seen, s)
    return True


@dataclass(frozen=True)
class HmmSolution:
    """State sequence and state means; states are labelled by first appearance."""

    states: np.ndarray
    means: np.ndarray

    def __init__(self, states, means):
        z = np.asarray(states, dtype=np.int64)
        mu = _as_matrix(means, "means")
        if z.ndim != 1 or z.size == 0:
            raise ValueError("states must be a non-empty sequence")
        if not _canonical_ok(z) or z[0] != 0:
            raise ValueError("states must be labelled 0, 1, ... in order of first appearance")
        if z.max() + 1 != mu.shape[0]:
            raise ValueError(f"{z.max() + 1} states used but {mu.shape[0]} means given")
        object.__setattr__(self, "states", z)
        object.__setattr__(self, "means", mu)

    @property
    def K(self) -> int:
        return self.means.shape[0]


@dataclass(frozen=True)
class HmmDirectSolution:
    """State sequence, means, transition rows and shared weights for the direct objective.

    ``transition_rows`` is ``K x (K+1)`` and ``shared_weights`` has ``K+1``
    entries; the last column carries the remainder mass. Unlike
    :class:`HmmSolution`, ``K`` is fixed by the caller and a state may go
    unused.
    """

    states: np.ndarray
    means: np.ndarray
    transition_rows: np.ndarray
    shared_weights: np.ndarray

    def __init__(self, states, means, transition_rows, shared_weights):
        z = np.asarray(states, dtype=np.int64)
        mu = _as_matrix(means, "means")
        pi = np.asarray(transition_rows, dtype=np.float64)
        beta = np.asarray(shared_weights, dtype=np.float64)
        K = mu.shape[0]
        if z.ndim != 1 or z.size == 0 or z[0] != 0 or z.min() < 0 or z.max() >= K:
            raise ValueError(f"states must start at 0 and lie in 0..{K - 1}")
        if pi.shape != (K, K + 1) or beta.shape != (K + 1,):
            raise ValueError(f"expected rows of shape {(K, K + 1)} and weights of shape {(K + 1,)}")
        for name, v in (("transition rows", pi), ("shared weights", beta)):
            if not (v > 0).all() or not np.allclose(v.sum(axis=-1), 1.0, rtol=0, atol=1e-12):
                raise ValueError(f"{name} must be strictly positive and sum to 1")
        object.__setattr__(self, "states", z)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "transition_rows", pi)
        object.__setattr__(self, "shared_weights", beta)

    @property
    def K(self) -> int:
        return self.means.shape[0]


# --------------------------------------------------------------------------
# statistics
# --------------------------------------------------------------------------


def local_cluster_counts(clustering: GroupedClustering) -> list[int]:
    """Number of distinct global clusters used by each group (``m_i``)."""
    return [int(np.unique(z).size) for z in clustering.assignments]


def transition_counts(states, K: int | None = None) -> np.ndarray:
    """``K x K`` matrix of ``#{t : z_(t-1) = i, z_t = j}``."""
    z = np.asarray(states, dtype=np.int64)
    K = int(z.max()) + 1 if K is None else K
    n = np.zeros((K, K), dtype=np.int64)
    np.add.at(n, (z[:-1], z[1:]), 1)
    return n


def distinct_transition_counts(solution: HmmSolution) -> list[int]:
    """Number of distinct successor states of each state (``s_i``)."""
    return [int(v) for v in (transition_counts(solution.states, solution.K) > 0).sum(axis=1)]


def _sq_dist(X, M):
    d = X - M
    return float(np.einsum("ij,ij->", d, d))


def _check_dim(data_dim, means, what="means"):
    if means.shape[1] != data_dim:
        raise ValueError(f"{what} have dimension {means.shape[1]}, data have {data_dim}")


def _ridge_penalty(means, lambda3):
    return lambda3 * float(np.einsum("ij,ij->", means, means))


# --------------------------------------------------------------------------
# objectives
# --------------------------------------------------------------------------


def hdp_mixture_objective(data: GroupedDataset, clustering: GroupedClustering, hp: Hyperparams) -> float:
    """Squared error plus ``lambda1 (K-1) + lambda2 sum_i (m_i - 1) + lambda3 sum_k |mu_k|^2``."""
    _check_dim(data.dim, clustering.means)
    if [len(z) for z in clustering.assignments] != data.sizes:
        raise ValueError("assignments do not match the group sizes of the data")
    sse = sum(_sq_dist(Y, clustering.means[z]) for Y, z in zip(data.groups, clustering.assignments))
    m = local_cluster_counts(clustering)
    return (sse + hp.lambda1 * (clustering.K - 1) + hp.lambda2 * sum(mi - 1 for mi in m)
            + _ridge_penalty(clustering.means, hp.lambda3))


def hdp_hmm_comb_objective(data: SequenceDataset, solution: HmmSolution, hp: Hyperparams) -> float:
    """Squared error plus ``lambda1 (K-1) + lambda2 sum_i (s_i - 1) + lambda3 sum_i |mu_i|^2``.

    Evaluated literally: a state with no outgoing transition (possible only
    for the last state of the sequence) contributes ``-lambda2``.
    """
    _check_dim(data.dim, solution.means)
    if solution.states.size != data.length:
        raise ValueError("state sequence length does not match the data")
    sse = _sq_dist(data.observations, solution.means[solution.states])
    s = distinct_transition_counts(solution)
    return (sse + hp.lambda1 * (solution.K - 1) + hp.lambda2 * sum(si - 1 for si in s)
            + _ridge_penalty(solution.means, hp.lambda3))


def kl_divergence(p, q) -> float:
    """``KL(p || q) = sum_j p_j log(p_j / q_j)`` with ``0 log 0 = 0``.

    Returns ``inf`` (with a :class:`RuntimeWarning`) when ``q_j = 0`` for some
    ``p_j > 0``.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"p and q must have equal length, got {p.shape} and {q.shape}")
    support = p > 0
    if (q[support] <= 0).any():
        warnings.warn("KL divergence is infinite: q vanishes where p does not", RuntimeWarning, stacklevel=2)
        return math.inf
    ps, qs = p[support], q[support]
    return float(np.sum(ps * (np.log(ps) - np.log(qs))))


def hdp_hmm_direct_objective(data: SequenceDataset, solution: HmmDirectSolution, hp: Hyperparams) -> float:
    """Direct-approach objective.

    ``sum_t |y_t - mu_(z_t)|^2 - zeta sum_(t>=2) log pi_(z_(t-1) z_t)
    + lambda1 K + lambda2 sum_i KL(beta || pi_i) + lambda3 sum_i |mu_i|^2``
    """
    _check_dim(data.dim, solution.means)
    z = solution.states
    if z.size != data.length:
        raise ValueError("state sequence length does not match the data")
    sse = _sq_dist(data.observations, solution.means[z])
    used = solution.transition_rows[z[:-1], z[1:]]
    if (used <= 0).any():
        raise ValueError("a transition used by the state sequence has probability zero")
    trans = -hp.zeta * float(np.sum(np.log(used)))
    kl = sum(kl_divergence(solution.shared_weights, row) for row in solution.transition_rows)
    return sse + trans + hp.lambda1 * solution.K + hp.lambda2 * kl + _ridge_penalty(solution.means, hp.lambda3)
