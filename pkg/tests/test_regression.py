"""Tests for ggmc.regression: coordinate-descent Lasso, scaled Lasso, node-wise fits."""

import math

import numpy as np
import pytest

from ggmc.errors import DegenerateScale, DidNotConverge
from ggmc.models import GfcMethod, SampleMatrix
from ggmc.regression import (
    coef_matrix,
    fit_all_nodes,
    kkt_check,
    lasso,
    lasso_objective,
    scaled_lasso,
    universal_level,
)
from ggmc.sampler import sample_mvn
from tests.conftest import identity_model


def centered_problem(rng, n=60, p=8, noise=1.0):
    D = rng.standard_normal((n, p))
    D -= D.mean(axis=0)
    beta = np.zeros(p)
    beta[:3] = [1.5, -2.0, 0.8]
    y = D @ beta + noise * rng.standard_normal(n)
    return D, y - y.mean()


def orthonormal_problem(rng, n=40, p=5):
    Q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    D = math.sqrt(n) * Q
    y = D @ np.array([1.0, -0.5, 0.2, 0.0, 0.05]) + 0.3 * rng.standard_normal(n)
    return D, y


def soft_threshold(x: np.ndarray, t: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


class TestLasso:
    def test_large_penalty_gives_zero(self, rng) -> None:
        D, y = centered_problem(rng)
        lam_max = float(np.max(np.abs(D.T @ y)) / D.shape[0])
        fit = lasso(D, y, lam_max)
        np.testing.assert_array_equal(fit.beta, 0.0)
        assert fit.converged

    def test_zero_penalty_is_least_squares(self, rng) -> None:
        D, y = centered_problem(rng, n=50, p=5)
        ols, *_ = np.linalg.lstsq(D, y, rcond=None)
        np.testing.assert_allclose(lasso(D, y, 0.0).beta, ols, atol=1e-5)

    def test_orthonormal_design_soft_thresholds(self, rng) -> None:
        D, y = orthonormal_problem(rng)
        lam = 0.15
        expected = soft_threshold(D.T @ y / D.shape[0], lam)
        np.testing.assert_allclose(lasso(D, y, lam).beta, expected, atol=1e-10)

    def test_objective_never_increases(self, rng) -> None:
        D, y = centered_problem(rng)
        fit = lasso(D, y, 0.05, check_objective=True)
        assert fit.converged
        assert lasso_objective(D, y, fit.beta, 0.05) <= lasso_objective(D, y, np.zeros(D.shape[1]), 0.05)

    def test_kkt_at_solution(self) -> None:
        rng = np.random.default_rng(100)
        for _ in range(100):
            D, y = centered_problem(rng, n=60, p=10)
            lam_max = float(np.max(np.abs(D.T @ y)) / D.shape[0])
            lam = float(rng.uniform(0.01, 0.5)) * lam_max
            fit = lasso(D, y, lam)
            assert kkt_check(D, y, lam, fit.beta) <= 1e-6

    def test_kkt_flags_non_solution(self, rng) -> None:
        D, y = centered_problem(rng)
        assert kkt_check(D, y, 0.05, np.ones(D.shape[1])) > 1e-3

    def test_iteration_cap_carries_partial_fit(self, rng) -> None:
        D, y = centered_problem(rng)
        D[:, 1] = D[:, 0] + 0.1 * D[:, 1]
        with pytest.raises(DidNotConverge) as info:
            lasso(D, y, 1e-4, max_iter=1)
        partial = info.value.fit
        assert partial is not None
        assert not partial.converged
        assert partial.iterations == 1

    def test_negative_penalty(self, rng) -> None:
        D, y = centered_problem(rng)
        with pytest.raises(ValueError):
            lasso(D, y, -1.0)

    def test_constant_column_stays_zero(self, rng) -> None:
        D, y = centered_problem(rng)
        D[:, 4] = 0.0
        assert lasso(D, y, 0.01).beta[4] == 0.0


class TestScaledLasso:
    def test_large_penalty_noise_is_response_scale(self, rng) -> None:
        D, _ = centered_problem(rng)
        y = rng.standard_normal(D.shape[0])
        y -= y.mean()
        fit = scaled_lasso(D, y, 100.0)
        np.testing.assert_array_equal(fit.beta, 0.0)
        assert fit.sigma_hat == pytest.approx(math.sqrt(np.mean(y**2)), rel=1e-6)

    def test_scale_equivariance(self, rng) -> None:
        D, y = centered_problem(rng)
        lambda0 = universal_level(D.shape[1] + 1, D.shape[0])
        base = scaled_lasso(D, y, lambda0)
        scaled = scaled_lasso(D, 3.7 * y, lambda0)
        np.testing.assert_allclose(scaled.beta, 3.7 * base.beta, rtol=1e-8, atol=1e-10)
        assert scaled.sigma_hat == pytest.approx(3.7 * base.sigma_hat, rel=1e-8)
        np.testing.assert_array_equal(scaled.beta != 0, base.beta != 0)

    def test_orthonormal_fixed_point(self, rng) -> None:
        D, y = orthonormal_problem(rng)
        n = D.shape[0]
        fit = scaled_lasso(D, y, 0.2)
        np.testing.assert_allclose(fit.beta, soft_threshold(D.T @ y / n, fit.lambda_used), atol=1e-6)
        resid_scale = np.linalg.norm(y - D @ fit.beta) / math.sqrt(n)
        assert fit.sigma_hat == pytest.approx(resid_scale, rel=1e-6)

    def test_constant_response(self, rng) -> None:
        D, _ = centered_problem(rng)
        with pytest.raises(DegenerateScale):
            scaled_lasso(D, np.full(D.shape[0], 2.0), 0.1)


class TestFitAllNodes:
    def test_null_model_is_sparse(self) -> None:
        X = sample_mvn(identity_model(10), 400, seed=5)
        report = fit_all_nodes(X)
        B = coef_matrix(report.fits)
        assert np.count_nonzero(B) / (10 * 9) <= 0.15
        assert report.not_converged == ()

    def test_near_copy_is_found(self, rng) -> None:
        x1 = rng.standard_normal(200)
        x2 = rng.standard_normal(200)
        x3 = x1 + 1e-3 * rng.standard_normal(200)
        report = fit_all_nodes(SampleMatrix(values=np.column_stack((x1, x2, x3))))
        fit = report.fits[2]
        assert fit.coef_of(0) > 0.8
        assert abs(fit.coef_of(1)) < 0.1

    def test_penalty_levels(self, null_samples) -> None:
        n, k = null_samples.n, null_samples.k
        level = universal_level(k, n)
        lasso_fits = fit_all_nodes(null_samples, GfcMethod.LASSO, kappa=2.0).fits
        sd0 = null_samples.values[:, 0].std()
        assert lasso_fits[0].lambda_used == pytest.approx(2.0 * level * sd0)
        scaled_fits = fit_all_nodes(null_samples, GfcMethod.SCALED_LASSO).fits
        assert scaled_fits[0].sigma_hat > 0.0
        assert scaled_fits[0].lambda_used == pytest.approx(level * scaled_fits[0].sigma_hat)

    def test_parallel_matches_serial(self, null_samples) -> None:
        serial = coef_matrix(fit_all_nodes(null_samples, threads=1).fits)
        parallel = coef_matrix(fit_all_nodes(null_samples, threads=4).fits)
        np.testing.assert_array_equal(serial, parallel)

    def test_permutation_equivariance(self, band5) -> None:
        X = sample_mvn(band5, 300, seed=8)
        perm = np.array([3, 0, 4, 1, 2])
        B = coef_matrix(fit_all_nodes(X).fits)
        B_perm = coef_matrix(fit_all_nodes(SampleMatrix(values=X.values[:, perm])).fits)
        np.testing.assert_allclose(B_perm, B[np.ix_(perm, perm)], atol=1e-5)

    def test_coef_layout(self, null_samples) -> None:
        report = fit_all_nodes(null_samples)
        B = coef_matrix(report.fits)
        np.testing.assert_array_equal(np.diag(B), 0.0)
        fit = report.fits[3]
        assert B[3, 7] == fit.coef_of(7)
        assert B[3, 1] == fit.coef_of(1)
        with pytest.raises(ValueError):
            fit.coef_of(3)

    def test_constant_column_with_inexact_mean(self, rng) -> None:
        values = rng.standard_normal((100, 4))
        values[:, 2] = 2.2
        report = fit_all_nodes(SampleMatrix(values=values), threads=1)
        B = coef_matrix(report.fits)
        np.testing.assert_array_equal(B[2], 0.0)
        np.testing.assert_array_equal(B[:, 2], 0.0)
        assert report.fits[2].lambda_used == 0.0

    def test_scaled_lasso_partial_fit_keeps_response_scale(self, rng) -> None:
        D, y = centered_problem(rng)
        with pytest.raises(DidNotConverge) as small:
            scaled_lasso(D, y, 0.05, max_iter=1)
        with pytest.raises(DidNotConverge) as large:
            scaled_lasso(D, 10.0 * y, 0.05, max_iter=1)
        np.testing.assert_allclose(large.value.fit.beta, 10.0 * small.value.fit.beta, rtol=1e-10)
        assert large.value.fit.sigma_hat == pytest.approx(10.0 * small.value.fit.sigma_hat)

    def test_needs_three_variables(self, rng) -> None:
        with pytest.raises(ValueError):
            fit_all_nodes(SampleMatrix(values=rng.standard_normal((20, 2))))
