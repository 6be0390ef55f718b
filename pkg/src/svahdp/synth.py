"""Synthetic planted-structure data for recovery experiments."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .objectives import GroupedDataset, SequenceDataset


@dataclass(frozen=True)
class ClusterSpec:
    n_groups: int = 2
    n_clusters: int = 3
    points_per_group: int = 30
    dim: int = 2
    separation: float = 10.0
    spread: float = 1.0
    seed: int = 0


@dataclass(frozen=True)
class HmmSpec:
    n_states: int = 3
    length: int = 90
    dim: int = 2
    separation: float = 10.0
    spread: float = 1.0
    stickiness: float = 0.9
    seed: int = 0


def planted_centers(n: int, dim: int, min_dist: float, rng: np.random.Generator) -> np.ndarray:
    """``n`` random centers with pairwise distance at least ``min_dist``."""
    if dim == 1:
        return (np.arange(n) * min_dist)[:, None].astype(np.float64)
    box = min_dist * max(n, 2) / 2
    centers = []
    while len(centers) < n:
        c = rng.uniform(-box, box, size=dim)
        if all(np.linalg.norm(c - o) >= min_dist for o in centers):
            centers.append(c)
    return np.array(centers)


def planted_clusters(spec: ClusterSpec) -> tuple[GroupedDataset, list[np.ndarray], np.ndarray]:
    """Grouped Gaussian clusters; returns the dataset, true labels per group, and the centers.

    Every cluster is used at least once overall.
    """
    rng = np.random.default_rng(spec.seed)
    centers = planted_centers(spec.n_clusters, spec.dim, spec.separation * spec.spread, rng)
    total = spec.n_groups * spec.points_per_group
    if total < spec.n_clusters:
        raise ValueError("not enough points to use every cluster")
    labels = rng.integers(spec.n_clusters, size=total)
    labels[rng.permutation(total)[:spec.n_clusters]] = np.arange(spec.n_clusters)
    Y = centers[labels] + spec.spread * rng.standard_normal((total, spec.dim))
    split = np.arange(spec.points_per_group, total, spec.points_per_group)
    return GroupedDataset(np.split(Y, split)), np.split(labels, split), centers


def planted_hmm(spec: HmmSpec) -> tuple[SequenceDataset, np.ndarray, np.ndarray]:
    """Sticky Gaussian HMM starting in state 0; redrawn until every state appears."""
    if not 0 <= spec.stickiness < 1:
        raise ValueError("stickiness must lie in [0, 1)")
    rng = np.random.default_rng(spec.seed)
    K = spec.n_states
    means = planted_centers(K, spec.dim, spec.separation * spec.spread, rng)
    P = np.full((K, K), (1 - spec.stickiness) / max(K - 1, 1))
    np.fill_diagonal(P, spec.stickiness if K > 1 else 1.0)
    while True:
        z = np.empty(spec.length, dtype=np.int64)
        z[0] = 0
        for t in range(1, spec.length):
            z[t] = rng.choice(K, p=P[z[t - 1]])
        if np.unique(z).size == K:
            break
    Y = means[z] + spec.spread * rng.standard_normal((spec.length, spec.dim))
    return SequenceDataset(Y), z, means
