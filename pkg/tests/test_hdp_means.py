import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import dpmeans_reference as ref
from svahdp.hdp_means import (FitOptions, HdpMeansState, assignment_sweep, fit_hdp_means, init_state, ridge_means,
                              update_means)
from svahdp.objectives import GroupedDataset, Hyperparams, hdp_mixture_objective
from svahdp.synth import ClusterSpec, planted_clusters


def objective_of(state, data, hp):
    return hdp_mixture_objective(data, state.clustering(data), hp)


def random_grouped(rng, max_groups=3, max_points=12, dim=2, scale=3.0):
    N = int(rng.integers(1, max_groups + 1))
    return GroupedDataset([rng.normal(scale=scale, size=(int(rng.integers(1, max_points + 1)), dim)) for _ in range(N)])


def test_single_point():
    data = GroupedDataset([[[1.5, -2.0]]])
    clustering, trace = fit_hdp_means(data, Hyperparams(1.0, 1.0))
    assert clustering.K == 1
    np.testing.assert_array_equal(clustering.means, [[1.5, -2.0]])
    assert trace[-1] == 0.0


def test_ridge_means():
    X = np.array([[2.0], [4.0], [6.0]])
    z = np.array([0, 0, 1])
    np.testing.assert_allclose(ridge_means(X, z, 2, 0.0), [[3.0], [6.0]])
    np.testing.assert_allclose(ridge_means(X, z, 2, 1.0), [[2.0], [3.0]])
    assert np.abs(ridge_means(X, z, 2, 1e12)).max() < 1e-10


def test_singleton_at_its_mean_is_unchanged():
    data = GroupedDataset([[[0.0], [0.1], [50.0]]])
    state = HdpMeansState(np.array([0, 0, 1]), np.array([[0.05], [50.0]]))
    new, moved = assignment_sweep(state, data, Hyperparams(1.0, 1.0))
    assert moved == 0
    np.testing.assert_array_equal(new.z, [0, 0, 1])


def test_tie_goes_to_lowest_index(backend):
    # y = 0 sits exactly between clusters at -1 and +1 (both used in the group)
    data = GroupedDataset([[[-1.0], [0.0], [1.0]]])
    for start in ([0, 1, 1], [0, 0, 1]):
        state = HdpMeansState(np.array(start), np.array([[-1.0], [1.0]]))
        new, _ = assignment_sweep(state, data, Hyperparams(10.0, 10.0), backend)
        assert new.z[1] == 0


def test_fresh_cluster_loses_ties(backend):
    # moving y = 3 to a fresh cluster costs exactly lambda1 + lambda2 = 9 = its distance to mu = 0
    data = GroupedDataset([[[0.0], [3.0], [-3.0]]])
    state = HdpMeansState(np.zeros(3, dtype=np.int64), np.array([[0.0]]))
    new, moved = assignment_sweep(state, data, Hyperparams(4.0, 5.0), backend)
    assert moved == 0 and new.K == 1


def test_fresh_cluster_mean_is_shrunk(backend):
    data = GroupedDataset([[[0.0], [10.0]]])
    state = HdpMeansState(np.zeros(2, dtype=np.int64), np.array([[0.0]]))
    new, _ = assignment_sweep(state, data, Hyperparams(1.0, 1.0, 1.0), backend)
    assert new.K == 2
    np.testing.assert_allclose(new.means[1], [5.0])


def test_cross_group_cluster_costs_lambda2(backend):
    # y = 0.9 in group 1: its own cluster (mean 2) costs 1.21, the group-0 cluster (mean 0) 0.81 + lambda2
    data = GroupedDataset([[[0.0], [0.0]], [[2.0], [0.9]]])
    for l2, expected in ((0.1, 0), (1.0, 1)):
        state = HdpMeansState(np.array([0, 0, 1, 1]), np.array([[0.0], [2.0]]))
        new, _ = assignment_sweep(state, data, Hyperparams(10.0, l2), backend)
        assert new.z[3] == expected


def test_update_means_is_exact_minimiser():
    rng = np.random.default_rng(3)
    data = random_grouped(rng)
    hp = Hyperparams(2.0, 1.0, 0.7)
    state = init_state(data, hp, FitOptions(init="kmeans++"), seed=1)
    state = update_means(state, data, hp)
    base = objective_of(state, data, hp)
    for _ in range(20):
        other = HdpMeansState(state.z, state.means + rng.normal(scale=1e-3, size=state.means.shape))
        assert objective_of(other, data, hp) >= base


def test_every_phase_is_monotone(backend):
    rng = np.random.default_rng(11)
    for _ in range(15):
        data = random_grouped(rng)
        hp = Hyperparams(*rng.uniform(0.5, 8, size=2), float(rng.choice([0.0, 0.5])))
        values = []
        fit_hdp_means(data, hp, FitOptions(), backend, callback=lambda phase, v: values.append(v))
        assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))


def test_trace_matches_returned_clustering():
    rng = np.random.default_rng(12)
    data = random_grouped(rng)
    hp = Hyperparams(3.0, 1.0, 0.2)
    clustering, trace = fit_hdp_means(data, hp)
    assert math.isclose(trace[-1], hdp_mixture_objective(data, clustering, hp), rel_tol=1e-12)
    assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))


def test_local_minimum_under_single_moves():
    rng = np.random.default_rng(13)
    for _ in range(10):
        data = random_grouped(rng)
        hp = Hyperparams(4.0, 2.0)
        clustering, _ = fit_hdp_means(data, hp)
        X, _ = data.stacked()
        z = np.concatenate(clustering.assignments)
        state = HdpMeansState(z, clustering.means.copy())
        _, moved = assignment_sweep(state, data, hp)
        assert moved == 0


def test_backends_agree():
    from svahdp import kernels
    if "compiled" not in kernels.BACKENDS:
        pytest.skip("compiled kernels not built")
    rng = np.random.default_rng(21)
    for _ in range(20):
        data = random_grouped(rng, max_points=30)
        hp = Hyperparams(*rng.uniform(0.5, 10, size=2), float(rng.choice([0.0, 1.0])))
        a, ta = fit_hdp_means(data, hp, backend="python")
        b, tb = fit_hdp_means(data, hp, backend="compiled")
        assert ta == tb
        for za, zb in zip(a.assignments, b.assignments):
            np.testing.assert_array_equal(za, zb)


def test_single_group_matches_reference_dpmeans():
    rng = np.random.default_rng(5)
    for _ in range(5):
        X = rng.normal(scale=4.0, size=(int(rng.integers(5, 25)), 2))
        hp = Hyperparams(*rng.uniform(1, 10, size=2))
        data = GroupedDataset([X])
        z_ref, _, obj_ref, hist = ref.run(X, hp.lambda1 + hp.lambda2)
        state = init_state(data, hp)
        for z_expected in hist:
            state, _ = assignment_sweep(state, data, hp)
            np.testing.assert_array_equal(state.z, z_expected)
            state = update_means(state, data, hp)
        clustering, trace = fit_hdp_means(data, hp)
        np.testing.assert_array_equal(clustering.assignments[0], z_ref)
        # DP-means counts lam * K, the HDP objective lam * (K - 1)
        assert abs(trace[-1] + hp.lambda1 + hp.lambda2 - obj_ref) <= 1e-12 * max(1.0, obj_ref)


def test_planted_recovery_default_spec():
    data, labels, _ = planted_clusters(ClusterSpec(seed=2))
    clustering, _ = fit_hdp_means(data, Hyperparams(30.0, 3.0), FitOptions(init="kmeans++", restarts=5))
    assert clustering.K == 3


def test_kmeanspp_init_is_valid_and_deterministic():
    rng = np.random.default_rng(8)
    data = random_grouped(rng, max_points=20)
    hp = Hyperparams(2.0, 1.0)
    a = init_state(data, hp, FitOptions(init="kmeans++", seed=4))
    b = init_state(data, hp, FitOptions(init="kmeans++", seed=4))
    np.testing.assert_array_equal(a.z, b.z)
    assert set(np.unique(a.z)) == set(range(a.K))


def test_restarts_never_worse_than_first():
    rng = np.random.default_rng(9)
    data = random_grouped(rng, max_points=25)
    hp = Hyperparams(6.0, 1.0)
    _, t1 = fit_hdp_means(data, hp, FitOptions(init="kmeans++", restarts=1))
    _, t5 = fit_hdp_means(data, hp, FitOptions(init="kmeans++", restarts=5))
    assert t5[-1] <= t1[-1]


def test_fit_options_validation():
    with pytest.raises(ValueError):
        FitOptions(max_sweeps=0)
    with pytest.raises(ValueError):
        FitOptions(tol=0.0)
    with pytest.raises(ValueError):
        FitOptions(init="random")


def test_duplicate_points_and_one_dimension():
    data = GroupedDataset([[1.0, 1.0, 1.0], [1.0]])
    clustering, trace = fit_hdp_means(data, Hyperparams(1.0, 1.0))
    assert clustering.K == 1 and trace[-1] == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 20), st.floats(0.1, 20), st.sampled_from([0.0, 0.3, 2.0]))
def test_sweep_never_increases_objective_property(seed, l1, l2, l3):
    rng = np.random.default_rng(seed)
    data = random_grouped(rng)
    hp = Hyperparams(l1, l2, l3)
    state = init_state(data, hp, FitOptions(init="kmeans++", seed=seed))
    before = objective_of(state, data, hp)
    state, _ = assignment_sweep(state, data, hp)
    mid = objective_of(state, data, hp)
    state = update_means(state, data, hp)
    assert mid <= before + 1e-9
    assert objective_of(state, data, hp) <= mid + 1e-9
