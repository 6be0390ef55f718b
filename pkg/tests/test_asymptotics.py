import math

import numpy as np
import pytest
from scipy.stats import beta as beta_dist, dirichlet, norm

from svahdp.asymptotics import (DEFAULT_GRID, check_grid, crf_concentrations, crf_limit_report,
                                direct_limit_check, direct_log_density, dirichlet_entropy_cancellation,
                                exact_log_joint_hmm, exact_log_joint_mixture, gaussian_normalization,
                                limit_report, log_gamma_expansion_check, mixture_customer_counts, optimal_tables,
                                toy_direct_instance, toy_hmm_instance, toy_mixture_instance)
from svahdp.combinatorics import CrfCounts, crf_log_prob_counts
from svahdp.objectives import HmmSolution, Hyperparams, SequenceDataset

HP = Hyperparams(1.0, 0.5, 0.3)


def strictly_decreasing(xs):
    return all(b < a for a, b in zip(xs, xs[1:]))


def test_default_grid():
    assert DEFAULT_GRID[0] == 16.0 and DEFAULT_GRID[-1] == 2.0 ** 20
    assert check_grid(DEFAULT_GRID) == list(DEFAULT_GRID)


@pytest.mark.parametrize("grid", [[1, 10, 100], [1, 10, 5, 1e4], [-1, 1, 10, 1e4], [1, 2, 3, 4]])
def test_bad_grids(grid):
    with pytest.raises(ValueError):
        check_grid(grid)


def test_optimal_tables():
    t = optimal_tables([[2, 0, 1], [0, 0, 3]])
    assert t.t.tolist() == [[1, 1], [0, 1]] and t.C.tolist() == [[2, 1], [0, 3]]


def test_optimal_tables_maximise_leading_term():
    # among all valid tables, one per cell minimises the number of tables and hence the b-linear cost
    C = np.array([[3, 2], [0, 4]])
    b = 2.0 ** 12
    best = crf_log_prob_counts(optimal_tables(C), crf_concentrations(HP, b))
    for t00 in range(1, 4):
        for t01 in range(1, 3):
            for t11 in range(1, 5):
                t = CrfCounts([[t00, t01], [0, t11]], C)
                assert crf_log_prob_counts(t, crf_concentrations(HP, b)) <= best + 1e-9


def test_crf_limit_decreases_monotonically():
    _, clustering = toy_mixture_instance()
    rep = crf_limit_report(mixture_customer_counts(clustering), HP)
    assert rep.targets[0] == HP.lambda1 * 1 + HP.lambda2 * 2
    assert strictly_decreasing(rep.gaps)
    assert rep.gaps[-1] < 1e-3
    assert 0.8 < rep.decay_order < 1.2


def test_mixture_joint_matches_scipy_densities():
    data, clustering = toy_mixture_instance()
    b = 3.0
    sigma2 = 0.5 / b
    ll = sum(norm.logpdf(y, loc=clustering.means[k, 0], scale=math.sqrt(sigma2)).sum()
             for Y, z in zip(data.groups, clustering.assignments) for y, k in zip(Y, z))
    prior = norm.logpdf(clustering.means[:, 0], scale=math.sqrt(sigma2 / HP.lambda3)).sum()
    crf = crf_log_prob_counts(optimal_tables(mixture_customer_counts(clustering)), crf_concentrations(HP, b))
    assert math.isclose(exact_log_joint_mixture(data, clustering, None, sigma2, HP), ll + prior + crf, rel_tol=1e-12)


def test_gaussian_normalization_flat_prior():
    a = gaussian_normalization(5, 2, 1, 0.1, 0.0)
    assert math.isclose(a, -2.5 * math.log(2 * math.pi * 0.1))


def test_mixture_and_hmm_limits():
    data, clustering = toy_mixture_instance()
    rep = limit_report(data, clustering, HP)
    assert rep.kind == "mixture" and rep.adjusted_gaps[-1] < 1e-3
    assert strictly_decreasing(rep.adjusted_gaps)
    hdata, sol = toy_hmm_instance()
    rep = limit_report(hdata, sol, HP)
    assert rep.kind == "hmm" and rep.adjusted_gaps[-1] < 1e-3
    # the raw gap keeps the normalisation, which decays only like log(b)/b
    assert rep.gaps[-1] > rep.adjusted_gaps[-1]


def test_hmm_terminal_state_leaves_lambda2_gap():
    # state 1 occurs only at the end: the exact CRF row is empty (contributes 0) while the
    # objective counts s_1 - 1 = -1, so the scaled joint misses the limit by lambda2
    data = SequenceDataset([0.0, 0.1, 2.0])
    sol = HmmSolution([0, 0, 1], [[0.05], [2.0]])
    rep = limit_report(data, sol, HP)
    assert abs(rep.adjusted_gaps[-1] - HP.lambda2) < 1e-3


def test_hmm_state_never_entered_leaves_lambda1_gap():
    # state 0 is only the start state and is never transitioned into: its dish column is
    # dropped, so the exact CRF sees one dish fewer than the objective counts states
    data = SequenceDataset([0.0, 2.0, 2.1, 1.9])
    sol = HmmSolution([0, 1, 1, 1], [[0.0], [2.0]])
    rep = limit_report(data, sol, HP)
    assert abs(rep.adjusted_gaps[-1] - HP.lambda1) < 1e-3


def test_limit_report_rejects_unknown_solution():
    data, _ = toy_mixture_instance()
    with pytest.raises(TypeError):
        limit_report(data, object(), HP)


def test_exact_joint_checks_table_consistency():
    data, clustering = toy_mixture_instance()
    with pytest.raises(ValueError):
        exact_log_joint_mixture(data, clustering, CrfCounts([[1]], [[1]]), 0.1, HP)
    hdata, sol = toy_hmm_instance()
    with pytest.raises(ValueError):
        exact_log_joint_hmm(hdata, sol, None, -1.0, HP)


def test_log_gamma_checks_pass():
    checks = log_gamma_expansion_check([1e-6, 1e-3, 1.0, 1e3, 1e6])
    assert all(c.passed for c in checks)
    assert [c.regime for c in checks] == ["small", "small", "small", "large", "large"]
    with pytest.raises(ValueError):
        log_gamma_expansion_check([0.0])


def test_direct_density_matches_scipy():
    sol = toy_direct_instance()
    b = 2.0
    gamma, alpha = math.exp(-HP.lambda1 * b), HP.lambda2 * b
    beta = sol.shared_weights
    expected = 0.0
    used = 0.0
    for i in range(sol.K):
        v = beta[i] / (1 - used)
        used += beta[i]
        expected += beta_dist.logpdf(v, 1, gamma)
        expected += dirichlet.logpdf(sol.transition_rows[i], alpha * beta)
    z = sol.states
    expected += np.log(sol.transition_rows[z[:-1], z[1:]]).sum()
    assert math.isclose(direct_log_density(sol, HP, b), expected, rel_tol=1e-10)


def test_direct_limit():
    rep = direct_limit_check(toy_direct_instance(), HP)
    assert rep.adjusted_gaps[-1] < 1e-3
    assert rep.adjusted_gaps[-1] < rep.adjusted_gaps[0]


def test_dirichlet_entropy_cancellation():
    rng = np.random.default_rng(0)
    for _ in range(20):
        w = rng.dirichlet(np.ones(int(rng.integers(2, 6))))
        lhs, rhs = dirichlet_entropy_cancellation(w, float(rng.uniform(0.5, 100)))
        assert math.isclose(lhs, rhs, rel_tol=1e-10, abs_tol=1e-10)


def test_report_serialises():
    data, clustering = toy_mixture_instance()
    d = limit_report(data, clustering, HP).to_dict()
    assert set(d) >= {"kind", "precision_grid", "gaps", "adjusted_gaps", "decay_order"}


def test_adjusted_gaps_halve_when_precision_doubles():
    grid = [2.0 ** e for e in range(4, 21)]
    data, clustering = toy_mixture_instance()
    hdata, sol = toy_hmm_instance()
    for rep in (crf_limit_report(mixture_customer_counts(clustering), HP, grid),
                limit_report(data, clustering, HP, grid), limit_report(hdata, sol, HP, grid)):
        g = rep.adjusted_gaps
        assert all(b / a <= 0.5 + 1e-6 for a, b in zip(g[1:], g[2:]))


def test_penalty_free_instance_gap_is_normalisation():
    from svahdp.objectives import GroupedClustering, GroupedDataset
    data = GroupedDataset([[[0.7]]])
    clustering = GroupedClustering([[0]], [[0.7]])
    hp = Hyperparams(1.0, 1.0)
    rep = limit_report(data, clustering, hp, DEFAULT_GRID)
    for b, gap, adj in zip(rep.precision_grid, rep.gaps, rep.adjusted_gaps):
        assert math.isclose(gap, abs(gaussian_normalization(1, 1, 1, 0.5 / b, 0.0)) / b, rel_tol=1e-12)
        assert adj == 0.0


def test_quadratic_terms_scale_with_precision():
    # with the CRF and normalisation removed, the log joint is -b * (SSE + lambda3 |mu|^2)
    data, clustering = toy_mixture_instance()
    hp = Hyperparams(1.0, 0.5, 0.3)
    sse_pen = sum(float(((Y - clustering.means[z]) ** 2).sum())
                                 for Y, z in zip(data.groups, clustering.assignments)) + 0.3 * float((clustering.means ** 2).sum())

    def quadratic(b):
        s2 = 0.5 / b
        crf = crf_log_prob_counts(optimal_tables(mixture_customer_counts(clustering)), crf_concentrations(hp, b))
        return exact_log_joint_mixture(data, clustering, None, s2, hp) - crf - gaussian_normalization(6, 2, 1, s2, 0.3)

    assert math.isclose((quadratic(8.0) - quadratic(4.0)) / 4.0, -sse_pen, rel_tol=1e-12)


def test_log_gamma_documented_thresholds():
    small, large = log_gamma_expansion_check([1e-6, 1e6])
    assert small.deviation < 1e-5 and large.deviation < 1e-5
    assert log_gamma_expansion_check([1.0])[0].log_gamma == 0.0


def test_direct_limit_single_state_uniform():
    from svahdp.objectives import HmmDirectSolution
    sol = HmmDirectSolution([0, 0, 0], [[0.0]], [[0.5, 0.5]], [0.5, 0.5])
    rep = direct_limit_check(sol, HP)
    assert rep.extra["limit"] == HP.lambda1


def test_optimal_tables_example():
    t = optimal_tables([[2, 1], [0, 4]])
    assert t.t.tolist() == [[1, 1], [0, 1]]
    assert t.t.sum(axis=1).tolist() == [2, 1]
