import numpy as np
import pytest
from numpy.testing import assert_allclose

from cblue.errors import RankDeficient
from cblue.estimators import covariance
from cblue.model import ConstraintSet, LinearModel, parameterize
from cblue.montecarlo import (
    ESTIMATOR_KINDS,
    ExperimentSpec,
    convolution_matrix,
    run_experiment,
    run_reference_trial,
    sample_noise,
    sample_proper_gaussian,
    standard_estimator_set,
)
from cblue.numerics import hpd_factor


def small_spec(**overrides):
    settings = {
        "n_x": 3,
        "n_u": 2,
        "base_noise_diag": (1.0, 0.5, 0.2, 0.1),
        "k_grid": (0.1, 1.0),
        "trials": 5,
        "seed": 3,
    }
    settings.update(overrides)
    return ExperimentSpec(**settings)


def test_convolution_matrix_unit_impulse():
    assert_allclose(convolution_matrix(np.array([1.0]), 3), np.eye(3), atol=0)


def test_convolution_matrix_two_taps():
    # full convolution with u = [1, 1] on a length-2 signal
    expected = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    assert_allclose(convolution_matrix(np.array([1.0, 1.0]), 2), expected, atol=0)


def test_convolution_matrix_entries():
    rng = np.random.default_rng(70)
    u = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    h = convolution_matrix(u, 3)
    assert h.shape == (6, 3)
    for i in range(6):
        for j in range(3):
            expected = u[i - j] if 0 <= i - j < 4 else 0.0
            assert h[i, j] == expected


def test_convolution_matrix_matches_numpy_convolve():
    rng = np.random.default_rng(71)
    u = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    assert_allclose(convolution_matrix(u, 3) @ x, np.convolve(u, x), rtol=1e-13)


def test_proper_gaussian_moments():
    rng = np.random.default_rng(72)
    draws = sample_proper_gaussian(4, rng, size=250_000).ravel()
    n = draws.size
    assert abs(draws.mean()) <= 4.0 / np.sqrt(n)
    variance = np.mean(np.abs(draws) ** 2)
    assert abs(variance - 1.0) <= 0.02
    pseudo = np.mean(draws**2)
    assert abs(pseudo) <= 0.02


def test_sample_noise_covariance():
    rng = np.random.default_rng(73)
    root = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    cov = root @ root.conj().T + np.eye(3)
    factor = hpd_factor(cov)
    draws = sample_noise(factor, rng, size=100_000)
    assert draws.shape == (100_000, 3)
    sample_cov = draws.T @ draws.conj() / draws.shape[0]
    assert np.abs(sample_cov - cov).max() <= 0.05 * np.abs(cov).max()


def test_sample_noise_single_draw_shape():
    factor = hpd_factor(np.eye(4))
    rng = np.random.default_rng(74)
    assert sample_noise(factor, rng).shape == (4,)


def test_spec_defaults():
    spec = ExperimentSpec()
    assert spec.n_x == 5
    assert spec.n_u == 6
    assert spec.n_y == 10
    assert len(spec.base_noise_diag) == 10
    assert len(spec.k_grid) == 10
    assert spec.k_grid[0] == pytest.approx(0.1)
    assert spec.k_grid[-1] == pytest.approx(1.0)


@pytest.mark.parametrize(
    "overrides",
    [
        {"base_noise_diag": (1.0, 1.0)},
        {"base_noise_diag": (1.0, -1.0, 1.0, 1.0)},
        {"k_grid": (0.1, 0.0)},
        {"trials": 0},
        {"seed": -1},
        {"true_x_policy": "bogus"},
        {"n_x": 1},
    ],
)
def test_spec_rejects_bad_settings(overrides):
    with pytest.raises(ValueError):
        small_spec(**overrides)


def test_estimator_kinds_fixed_order():
    assert ESTIMATOR_KINDS == (
        "ls",
        "ls_meansub",
        "cls",
        "blue",
        "blue_meansub",
        "cblue",
    )


def test_reference_trial_draw_protocol():
    spec = small_spec()
    trial = run_reference_trial(spec, k_index=1, trial_index=2)
    x_true = trial["x_true"]
    assert x_true.shape == (3,)
    assert abs(x_true.sum()) <= 1e-12
    assert np.linalg.norm(x_true) == pytest.approx(1.0, abs=1e-12)
    assert trial["u"].shape == (2,)
    assert trial["y"].shape == (4,)
    assert trial["regenerations"] == 0
    for kind in ESTIMATOR_KINDS:
        estimate = trial["estimates"][kind]
        assert estimate.shape == (3,)
        assert np.all(np.isfinite(estimate))
        assert trial["analytic"][kind] > 0
    assert abs(trial["estimates"]["cblue"].sum()) <= 1e-10
    assert abs(trial["estimates"]["cls"].sum()) <= 1e-10


def test_reference_trial_is_reproducible():
    spec = small_spec()
    first = run_reference_trial(spec, 0, 1)
    second = run_reference_trial(spec, 0, 1)
    assert np.array_equal(first["u"], second["u"])
    assert np.array_equal(first["y"], second["y"])
    for kind in ESTIMATOR_KINDS:
        assert np.array_equal(first["estimates"][kind], second["estimates"][kind])


def test_reference_trial_index_bounds():
    spec = small_spec()
    with pytest.raises(IndexError):
        run_reference_trial(spec, 5, 0)
    with pytest.raises(IndexError):
        run_reference_trial(spec, 0, 99)


def test_experiment_matches_reference_path():
    spec = small_spec(trials=6)
    report = run_experiment(spec)
    for k_index in range(len(spec.k_grid)):
        empirical = {kind: 0.0 for kind in ESTIMATOR_KINDS}
        analytic = {kind: 0.0 for kind in ESTIMATOR_KINDS}
        for trial_index in range(spec.trials):
            trial = run_reference_trial(spec, k_index, trial_index)
            for kind in ESTIMATOR_KINDS:
                error = trial["estimates"][kind] - trial["x_true"]
                empirical[kind] += np.mean(np.abs(error) ** 2) / spec.trials
                analytic[kind] += trial["analytic"][kind] / spec.trials
        for kind in ESTIMATOR_KINDS:
            assert report.empirical_mse[kind][k_index] == pytest.approx(
                empirical[kind], rel=1e-10
            )
            assert report.analytic_mse[kind][k_index] == pytest.approx(
                analytic[kind], rel=1e-10
            )


def test_experiment_is_bitwise_deterministic():
    spec = small_spec(trials=4)
    first = run_experiment(spec)
    second = run_experiment(spec)
    for kind in ESTIMATOR_KINDS:
        assert np.array_equal(first.empirical_mse[kind], second.empirical_mse[kind])
        assert np.array_equal(first.analytic_mse[kind], second.analytic_mse[kind])
        assert np.array_equal(first.mse_stderr[kind], second.mse_stderr[kind])
        assert np.array_equal(
            first.elementwise_bias[kind], second.elementwise_bias[kind]
        )
    assert first.regenerations == second.regenerations


def test_experiment_seed_changes_results():
    base = run_experiment(small_spec(trials=4, seed=1))
    other = run_experiment(small_spec(trials=4, seed=2))
    assert not np.array_equal(base.empirical_mse["cblue"], other.empirical_mse["cblue"])


def test_experiment_report_shapes_and_consistency():
    spec = small_spec(trials=8)
    report = run_experiment(spec)
    nk = len(spec.k_grid)
    assert report.kinds == ESTIMATOR_KINDS
    assert report.trials == spec.trials
    for kind in ESTIMATOR_KINDS:
        assert report.empirical_mse[kind].shape == (nk,)
        assert report.analytic_mse[kind].shape == (nk,)
        assert report.mse_stderr[kind].shape == (nk,)
        assert report.elementwise_bias[kind].shape == (nk, spec.n_x)
        assert report.elementwise_mse[kind].shape == (nk, spec.n_x)
        assert np.all(report.mse_stderr[kind] >= 0)
        # the scalar MSE is the average of the per-element one
        assert_allclose(
            report.elementwise_mse[kind].mean(axis=1),
            report.empirical_mse[kind],
            rtol=1e-12,
        )


def test_fallback_path_matches_batched_engine(monkeypatch):
    import cblue.montecarlo as mc

    spec = small_spec(trials=6)
    batched = run_experiment(spec)

    def forced_failure(*args, **kwargs):
        raise np.linalg.LinAlgError("forced batch failure")

    monkeypatch.setattr(mc, "_batch_sweep", forced_failure)
    fallback = run_experiment(spec)
    for kind in ESTIMATOR_KINDS:
        assert_allclose(
            fallback.empirical_mse[kind],
            batched.empirical_mse[kind],
            rtol=1e-10,
            atol=1e-14,
        )
        assert_allclose(
            fallback.analytic_mse[kind],
            batched.analytic_mse[kind],
            rtol=1e-10,
            atol=1e-14,
        )
    assert fallback.regenerations == batched.regenerations == 0


class ScriptedRng:
    """Stands in for a Generator; hands out queued standard_normal arrays."""

    def __init__(self, arrays):
        self.queue = [np.asarray(a, dtype=float) for a in arrays]

    def standard_normal(self, shape=None):
        drawn = self.queue.pop(0)
        expected = (drawn.shape if drawn.shape else ()) if shape is None else shape
        assert drawn.shape == (expected if isinstance(expected, tuple) else (expected,))
        return drawn


def test_degenerate_input_sequence_is_regenerated():
    from cblue.montecarlo import _single_trial_from_draws

    n_x, n_u = 2, 2
    constraints = ConstraintSet(np.ones((1, n_x)), np.zeros(1))
    param = parameterize(constraints)
    cov = np.diag([1.0, 0.5, 0.1])
    cov_factor = hpd_factor(cov)
    x = param.basis[:, 0]
    z = np.zeros(3, dtype=complex)
    # first u is identically zero: every estimator must refuse it, the trial
    # then redraws u (one regeneration) from the scripted stream
    replacement = ScriptedRng([np.array([np.sqrt(2.0), 0.0]), np.zeros(2)])
    estimates, analytic, regenerations, y = _single_trial_from_draws(
        np.zeros(n_u, dtype=complex),
        x,
        z,
        replacement,
        n_x,
        constraints,
        param,
        cov,
        cov_factor,
    )
    assert regenerations == 1
    assert not replacement.queue
    # the replacement u is [1, 0]: H is the identity padded with a zero row
    assert_allclose(y, np.concatenate([x, [0.0]]), atol=1e-12)
    for kind in ESTIMATOR_KINDS:
        assert np.all(np.isfinite(estimates[kind]))
        assert analytic[kind] > 0


def test_regeneration_cap():
    from cblue.montecarlo import _MAX_REGENERATIONS, _single_trial_from_draws

    n_x, n_u = 2, 2
    constraints = ConstraintSet(np.ones((1, n_x)), np.zeros(1))
    param = parameterize(constraints)
    cov = np.diag([1.0, 0.5, 0.1])
    cov_factor = hpd_factor(cov)
    zeros_forever = ScriptedRng([np.zeros(2)] * (2 * (_MAX_REGENERATIONS + 1)))
    with pytest.raises(RankDeficient):
        _single_trial_from_draws(
            np.zeros(n_u, dtype=complex),
            param.basis[:, 0],
            np.zeros(3, dtype=complex),
            zeros_forever,
            n_x,
            constraints,
            param,
            cov,
            cov_factor,
        )


def test_analytic_mse_scales_linearly_with_noise_level():
    rng = np.random.default_rng(75)
    spec = ExperimentSpec()
    u = sample_proper_gaussian(spec.n_u, rng)
    h = convolution_matrix(u, spec.n_x)
    constraints = ConstraintSet(np.ones((1, spec.n_x)), np.zeros(1))
    param = parameterize(constraints)
    base = np.diag(np.asarray(spec.base_noise_diag))
    k = 0.37
    small = standard_estimator_set(LinearModel(h, k * base), constraints, param)
    full = standard_estimator_set(LinearModel(h, base), constraints, param)
    for kind in ESTIMATOR_KINDS:
        mse_small = covariance(small[kind], k * base).per_element_variance.sum()
        mse_full = covariance(full[kind], base).per_element_variance.sum()
        assert mse_small == pytest.approx(k * mse_full, rel=1e-12)


def test_empirical_tracks_analytic_at_moderate_trials():
    spec = ExperimentSpec(k_grid=(1.0,), trials=20_000, seed=5)
    report = run_experiment(spec)
    for kind in ESTIMATOR_KINDS:
        empirical = report.empirical_mse[kind][0]
        analytic = report.analytic_mse[kind][0]
        assert abs(empirical - analytic) <= 0.05 * analytic


def test_standard_estimator_set_labels():
    rng = np.random.default_rng(76)
    u = sample_proper_gaussian(6, rng)
    h = convolution_matrix(u, 5)
    constraints = ConstraintSet(np.ones((1, 5)), np.zeros(1))
    param = parameterize(constraints)
    estimators = standard_estimator_set(
        LinearModel(h, np.eye(10)), constraints, param
    )
    assert tuple(estimators) == ESTIMATOR_KINDS
    assert estimators["cblue"].label in ("cblue_direct", "cblue_nullspace")
    assert estimators["ls_meansub"].label == "ls_meansub"
