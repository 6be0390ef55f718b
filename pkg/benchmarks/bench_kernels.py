"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from svahdp import kernels
from svahdp.hdp_means import HdpMeansState, assignment_sweep
from svahdp.objectives import Hyperparams
from svahdp.synth import ClusterSpec, planted_clusters


def bench_viterbi(impl, rng):
    unary, arc = rng.random((2000, 20)), rng.random((20, 20))
    return lambda: impl.viterbi(unary, arc, 0)


def bench_sweep(name, rng):
    data, _, _ = planted_clusters(ClusterSpec(n_groups=10, n_clusters=8, points_per_group=200, dim=3, seed=0))
    X, _ = data.stacked()
    z = rng.integers(8, size=X.shape[0])
    state = HdpMeansState(z, np.array([X[z == k].mean(axis=0) for k in range(8)]))
    hp = Hyperparams(30.0, 3.0)
    return lambda: assignment_sweep(state, data, hp, backend=name)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'backend':<10}{'best (ms)':>12}")
    results = {}
    for name in sorted(kernels.BACKENDS):
        impl = kernels.get_backend(name)
        for label, fn in (("viterbi T=2000 K=20", bench_viterbi(impl, rng)),
                          ("hdp sweep n=2000 D=3", bench_sweep(name, rng))):
            best = min(timeit.repeat(fn, number=1, repeat=args.repeat)) * 1e3
            results[(label, name)] = best
            print(f"{label:<28}{name:<10}{best:>12.2f}")
    if "compiled" in kernels.BACKENDS:
        for label in ("viterbi T=2000 K=20", "hdp sweep n=2000 D=3"):
            print(f"speedup {label}: {results[(label, 'python')] / results[(label, 'compiled')]:.1f}x")
    else:
        print("compiled kernels not built; only the fallback was timed")


if __name__ == "__main__":
    main()
