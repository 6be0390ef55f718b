"""Coordinate descent for the HDP-mixture SVA objective (grouped DP-means).

Each sweep reassigns every observation (groups in input order, observations in
input order) to the option with the smallest exact objective change, then
re-fits all means in closed form. Ties go to the lowest cluster index, and a
fresh cluster is opened only when strictly cheaper than every existing one.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import kernels
from .objectives import GroupedClustering, GroupedDataset, Hyperparams, hdp_mixture_objective

log = logging.getLogger(__name__)

INITS = ("single", "kmeans++")


@dataclass(frozen=True)
class FitOptions:
    max_sweeps: int = 200
    tol: float = 1e-9
    seed: int = 0
    restarts: int = 1
    init: str = "single"

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}, got {self.init!r}")


@dataclass
class HdpMeansState:
    """Flat assignment vector ``z`` (stacked group order) and the ``K x D`` means."""

    z: np.ndarray
    means: np.ndarray

    @property
    def K(self) -> int:
        return self.means.shape[0]

    def copy(self) -> "HdpMeansState":
        return HdpMeansState(self.z.copy(), self.means.copy())

    def clustering(self, data: GroupedDataset) -> GroupedClustering:
        return GroupedClustering(np.split(self.z, np.cumsum(data.sizes)[:-1]), self.means)


def ridge_means(X: np.ndarray, z: np.ndarray, K: int, lambda3: float) -> np.ndarray:
    """``mu_k = sum_(z=k) y / (n_k + lambda3)``."""
    sums = np.zeros((K, X.shape[1]))
    np.add.at(sums, z, X)
    denom = (np.bincount(z, minlength=K) + lambda3)[:, None]
    # empty clusters with lambda3 = 0 have no defined mean; leave them at 0
    return np.divide(sums, denom, out=np.zeros_like(sums), where=denom > 0)


def init_state(data: GroupedDataset, hp: Hyperparams, opts: FitOptions = FitOptions(), seed: int | None = None) -> HdpMeansState:
    X, _ = data.stacked()
    n = X.shape[0]
    if opts.init == "single":
        z = np.zeros(n, dtype=np.int64)
        return HdpMeansState(z, ridge_means(X, z, 1, hp.lambda3))
    rng = np.random.default_rng(opts.seed if seed is None else seed)
    threshold = hp.lambda1 + hp.lambda2
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    while True:
        far = d2 > threshold
        if not far.any():
            break
        w = np.where(far, d2, 0.0)
        c = X[rng.choice(n, p=w / w.sum())]
        centers.append(c)
        d2 = np.minimum(d2, ((X - c) ** 2).sum(axis=1))
    C = np.array(centers)
    z = ((X[:, None, :] - C[None]) ** 2).sum(axis=2).argmin(axis=1)
    _, z = np.unique(z, return_inverse=True)
    z = z.astype(np.int64)
    return HdpMeansState(z, ridge_means(X, z, int(z.max()) + 1, hp.lambda3))


def assignment_sweep(state: HdpMeansState, data: GroupedDataset, hp: Hyperparams,
                     backend: str | None = None) -> tuple[HdpMeansState, int]:
    """Exact-delta reassignment of every observation; returns the new state and the number of moves.

    For observation ``y`` in group ``i`` the options are: a cluster already
    used in group ``i`` (squared distance), a cluster not yet used in group
    ``i`` (squared distance + lambda2), or a fresh cluster with mean
    ``y / (1 + lambda3)`` (``lambda3/(1+lambda3) |y|^2 + lambda1 + lambda2``).
    Leaving a cluster may free its lambda2 and, if it empties, its lambda1 and
    ridge penalty; empty clusters are dropped and labels compacted.
    """
    impl = kernels.get_backend(backend) if backend else kernels
    X, g = data.stacked()
    n, D = X.shape
    K = state.K
    cap = K + n
    z = state.z.astype(np.int64, copy=True)
    means = np.zeros((cap, D))
    means[:K] = state.means
    counts = np.zeros(cap, dtype=np.int64)
    counts[:K] = np.bincount(z, minlength=K)
    gcounts = np.zeros((data.n_groups, cap), dtype=np.int64)
    np.add.at(gcounts, (g, z), 1)
    K, moved = impl.hdp_assignment_sweep(X, g, z, means, counts, gcounts, K,
                                         float(hp.lambda1), float(hp.lambda2), float(hp.lambda3))
    return HdpMeansState(z, means[:K].copy()), int(moved)


def update_means(state: HdpMeansState, data: GroupedDataset, hp: Hyperparams) -> HdpMeansState:
    """Replace every mean by its ridge-shrunk centroid, the exact minimiser given the assignments."""
    X, _ = data.stacked()
    return replace(state, means=ridge_means(X, state.z, state.K, hp.lambda3))


def _fit_once(data, hp, opts, seed, backend, callback):
    state = init_state(data, hp, opts, seed)
    obj = hdp_mixture_objective(data, state.clustering(data), hp)
    if callback:
        callback("init", obj)
    trace = []
    for sweep in range(opts.max_sweeps):
        state, moved = assignment_sweep(state, data, hp, backend)
        if callback:
            callback("assign", hdp_mixture_objective(data, state.clustering(data), hp))
        state = update_means(state, data, hp)
        new = hdp_mixture_objective(data, state.clustering(data), hp)
        if callback:
            callback("means", new)
        trace.append(new)
        log.debug("sweep %d: K=%d moved=%d objective=%.12g", sweep + 1, state.K, moved, new)
        done = moved == 0 or obj - new < opts.tol
        obj = new
        if done:
            break
    return state, trace


def fit_hdp_means(data: GroupedDataset, hp: Hyperparams, opts: FitOptions = FitOptions(),
                  backend: str | None = None,
                  callback: Callable[[str, float], None] | None = None) -> tuple[GroupedClustering, list[float]]:
    """Minimise the HDP-mixture objective; returns the clustering and the per-sweep objective trace.

    ``callback(phase, objective)`` is invoked after initialisation and after
    every assignment and mean-update phase. With several restarts (only
    meaningful for ``init="kmeans++"``) the lowest final objective wins.
    """
    best = None
    for r in range(opts.restarts):
        state, trace = _fit_once(data, hp, opts, opts.seed + r, backend, callback)
        if best is None or trace[-1] < best[1][-1]:
            best = (state, trace)
    state, trace = best
    return state.clustering(data), trace
