"""Independent DP-means (objective ``sum |x - mu_z|^2 + lam * K``) by brute-force objective evaluation.

Each observation in turn is tried in every existing cluster and in a fresh
cluster centred on it; the full objective of every candidate (means held
fixed, an emptied cluster dropped) is recomputed from scratch and the
smallest wins, lowest index first, fresh cluster last. Means are then reset to
centroids. Shares no code with the package.
"""
import numpy as np


def objective(X, z, means, lam):
    return float(((X - means[z]) ** 2).sum()) + lam * len(means)


def _drop_empty(z, means):
    used = np.unique(z)
    remap = -np.ones(len(means), dtype=np.int64)
    remap[used] = np.arange(used.size)
    return remap[z], means[used]


def sweep(X, z, means, lam):
    z, means = z.copy(), means.copy()
    moved = 0
    for i in range(len(X)):
        cands = []
        for k in range(len(means)):
            zz = z.copy()
            zz[i] = k
            zz, mm = _drop_empty(zz, means)
            cands.append((zz, mm))
        zz = z.copy()
        zz[i] = len(means)
        zz, mm = _drop_empty(zz, np.vstack([means, X[i]]))
        cands.append((zz, mm))
        scores = [objective(X, cz, cm, lam) for cz, cm in cands]
        stay = scores[z[i]]
        best = min(range(len(scores)), key=lambda j: (scores[j], j))
        if scores[best] < stay:
            moved += 1
            z, means = cands[best]
    return z, means, moved


def centroids(X, z):
    K = int(z.max()) + 1
    return np.array([X[z == k].mean(axis=0) for k in range(K)])


def run(X, lam, max_sweeps=200, tol=1e-9):
    z = np.zeros(len(X), dtype=np.int64)
    means = centroids(X, z)
    obj = objective(X, z, means, lam)
    history = []
    for _ in range(max_sweeps):
        z, means, moved = sweep(X, z, means, lam)
        history.append(z.copy())
        means = centroids(X, z)
        new = objective(X, z, means, lam)
        done = moved == 0 or obj - new < tol
        obj = new
        if done:
            break
    return z, means, obj, history
