"""Property checks for the constrained estimators on randomized instances."""

import numpy as np
from numpy.testing import assert_allclose

from cblue.estimators import (
    AffineEstimator,
    blue,
    cblue_direct,
    cblue_nullspace,
    cls,
    covariance,
    mean_subtracted,
    project_onto_constraints,
)
from cblue.model import ConstraintSet, LinearModel, parameterize
from cblue.numerics import nullspace_basis
from cblue.verify import (
    check_basis_invariance,
    check_constraint_satisfaction,
    check_covariance_formula_agreement,
    check_feasible_unbiasedness,
    check_form_equivalence,
    check_oracle_agreement,
    check_particular_invariance,
    check_projection_identity,
    check_variance_optimality,
    check_white_noise_reduction,
    random_instance,
    run_suite,
)


def _assert_passes(check, instances, seed):
    rng = np.random.default_rng(seed)
    result = check(rng, instances)
    assert result.passed, f"{result.name}: worst {result.worst:.3e} > tol {result.tol:.1e}"


def test_constraints_hold_on_random_draws():
    _assert_passes(check_constraint_satisfaction, 60, 101)


def test_feasible_points_are_reproduced():
    _assert_passes(check_feasible_unbiasedness, 60, 102)


def test_covariance_formulas_agree():
    _assert_passes(check_covariance_formula_agreement, 60, 103)


def test_projection_identity_holds():
    _assert_passes(check_projection_identity, 60, 104)


def test_direct_and_nullspace_forms_agree():
    _assert_passes(check_form_equivalence, 60, 105)


def test_particular_solution_does_not_matter():
    _assert_passes(check_particular_invariance, 60, 106)


def test_basis_rotation_does_not_matter():
    _assert_passes(check_basis_invariance, 60, 107)


def test_white_noise_reduces_to_cls():
    _assert_passes(check_white_noise_reduction, 60, 108)


def test_both_forms_match_kkt_oracle():
    _assert_passes(check_oracle_agreement, 60, 109)


def test_cblue_beats_listed_competitors():
    _assert_passes(check_variance_optimality, 60, 110)


def test_full_suite_is_green():
    results = run_suite(instances=25, seed=7)
    assert len(results) == 10
    assert all(result.passed for result in results)


def test_injected_defect_is_caught():
    # the hidden sign defect must trip the offset-sensitive properties
    results = run_suite(instances=25, seed=7, defective=True)
    failed = [result.name for result in results if not result.passed]
    assert failed, "defective estimator slipped through every property"
    assert "constraint-satisfaction" in failed


def test_variance_never_below_cblue_for_unbiased_feasible_competitors():
    # any E' = E + N V G^H with G spanning null((HN)^H) stays unbiased and
    # feasible, so its per-element variance cannot drop below the optimum
    rng = np.random.default_rng(60)
    for _ in range(25):
        model, constraints = random_instance(rng, overdetermined=True)
        param = parameterize(constraints)
        est = cblue_direct(model, constraints)
        base_var = covariance(est, model.C_nn).per_element_variance
        reduced = model.H @ param.basis
        left_null = nullspace_basis(reduced.conj().T)
        for _ in range(4):
            v = rng.standard_normal(
                (param.n0, left_null.shape[1])
            ) + 1j * rng.standard_normal((param.n0, left_null.shape[1]))
            shift = param.basis @ v @ left_null.conj().T
            rival = AffineEstimator(est.E + shift, est.f, "rival")
            rival_var = covariance(rival, model.C_nn).per_element_variance
            assert np.all(rival_var >= base_var - 1e-10 * (base_var.max() + 1.0))


def test_mean_subtracted_blue_is_dominated_under_zero_sum():
    rng = np.random.default_rng(61)
    for _ in range(25):
        n_x = int(rng.integers(2, 7))
        n_y = n_x + int(rng.integers(1, 5))
        h = rng.standard_normal((n_y, n_x)) + 1j * rng.standard_normal((n_y, n_x))
        root = (rng.standard_normal((n_y, n_y)) + 1j * rng.standard_normal((n_y, n_y))) / 2
        model = LinearModel(h, root @ root.conj().T + np.eye(n_y))
        constraints = ConstraintSet(np.ones((1, n_x)), np.zeros(1))
        best = covariance(
            cblue_direct(model, constraints), model.C_nn
        ).per_element_variance
        for competitor in (
            mean_subtracted(blue(model)),
            project_onto_constraints(blue(model), constraints),
            cls(model, constraints),
        ):
            rival_var = covariance(competitor, model.C_nn).per_element_variance
            assert np.all(best <= rival_var + 1e-10 * (rival_var.max() + 1.0))


def test_total_variance_matches_trace():
    rng = np.random.default_rng(62)
    model, constraints = random_instance(rng, overdetermined=True)
    est = cblue_nullspace(model, parameterize(constraints))
    result = covariance(est, model.C_nn)
    assert_allclose(
        result.per_element_variance.sum(), np.trace(result.C).real, rtol=1e-12
    )


def test_estimator_mean_over_noise_matches_truth():
    # empirical unbiasedness: average many noisy estimates of one feasible truth
    rng = np.random.default_rng(63)
    model, constraints = random_instance(rng, overdetermined=True)
    param = parameterize(constraints)
    est = cblue_direct(model, constraints)
    alpha = rng.standard_normal(param.n0) + 1j * rng.standard_normal(param.n0)
    x_true = param.point(alpha)
    clean = model.H @ x_true
    lower = model.noise_factor.lower
    trials = 4000
    noise = (
        rng.standard_normal((trials, model.n_y))
        + 1j * rng.standard_normal((trials, model.n_y))
    ) / np.sqrt(2)
    y_batch = clean[:, None] + lower @ noise.T
    mean_estimate = est.apply(y_batch).mean(axis=1)
    sigma = np.sqrt(
        covariance(est, model.C_nn).per_element_variance.max() / trials
    )
    assert np.linalg.norm(mean_estimate - x_true, ord=np.inf) <= 6 * sigma
