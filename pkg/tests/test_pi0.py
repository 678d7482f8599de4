"""Tests for ggmc.pi0: Storey's estimator, lambda selection and ECDF helpers."""

import numpy as np
import pytest
from scipy.special import erfc

from ggmc.errors import GridTooSmall, InvalidLambda
from ggmc.models import Pi0Method, Pi0Selection
from ggmc.pi0 import (
    bootstrap_pi0,
    default_grid,
    ecdf,
    estimate_pi0,
    fixed_lambda_pi0,
    ks_distance,
    lambda_grid,
    pi0_bias_curve,
    pi0_curve,
    smoother_pi0,
    smoothing_spline_fit,
    storey_pi0,
    uniform_cdf,
)


def uniform_pvalues(N: int, seed: int = 1) -> np.ndarray:
    return np.random.default_rng(seed).uniform(size=N)


def mixture_pvalues(N: int, pi0: float, shift: float, seed: int = 2) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n_null = int(round(pi0 * N))
    z = rng.standard_normal(N - n_null) + shift
    return np.concatenate((rng.uniform(size=n_null), erfc(np.abs(z) / np.sqrt(2.0))))


class TestStorey:
    def test_example(self) -> None:
        assert storey_pi0([0.1, 0.3, 0.5, 0.7, 0.9], 0.5) == pytest.approx(0.8)

    def test_lambda_zero_counts_everything(self) -> None:
        assert storey_pi0([0.2, 0.4, 0.9], 0.0) == pytest.approx(1.0)

    def test_raw_value_is_not_clamped(self) -> None:
        assert storey_pi0([1.0, 1.0], 0.5) == pytest.approx(2.0)
        assert fixed_lambda_pi0([1.0, 1.0], 0.5).pi0_hat == 1.0

    @pytest.mark.parametrize("lam", [1.0, -0.1, 1.5])
    def test_invalid_lambda(self, lam) -> None:
        with pytest.raises(InvalidLambda):
            storey_pi0([0.5], lam)

    def test_rejects_invalid_pvalues(self) -> None:
        with pytest.raises(ValueError):
            storey_pi0([0.5, 1.2], 0.5)

    def test_curve_matches_brute_force(self) -> None:
        rng = np.random.default_rng(3)
        p = np.round(rng.uniform(size=500), 2)
        grid = default_grid()
        W, curve = pi0_curve(p, grid)
        for g, lam in enumerate(grid):
            count = int(np.sum(p > lam))
            assert W[g] == count
            assert curve[g] == count / (p.size * (1.0 - lam))

    def test_uniform_near_one(self) -> None:
        assert storey_pi0(uniform_pvalues(10_000), 0.5) == pytest.approx(1.0, abs=0.04)

    def test_extra_unit_pvalues_raise_curve(self) -> None:
        p = uniform_pvalues(200)
        grid = default_grid()
        W, before = pi0_curve(p, grid)
        _, after = pi0_curve(np.concatenate((p, [1.0, 1.0, 1.0])), grid)
        assert np.all(after >= before)
        assert np.all(after[W < p.size] > before[W < p.size])


class TestGrid:
    def test_default_grid(self) -> None:
        grid = default_grid()
        assert grid.size == 96
        assert grid[0] == 0.0
        assert grid[-1] == 0.95

    def test_lambda_grid(self) -> None:
        np.testing.assert_allclose(lambda_grid(0.0, 0.95, 0.05), np.arange(20) * 0.05)
        np.testing.assert_allclose(lambda_grid(0.0, 0.95, 0.01), default_grid())

    def test_too_few_points(self) -> None:
        with pytest.raises(GridTooSmall):
            smoother_pi0(uniform_pvalues(100), grid=[0.1, 0.2, 0.3])

    def test_unsorted(self) -> None:
        with pytest.raises(GridTooSmall):
            smoother_pi0(uniform_pvalues(100), grid=[0.1, 0.3, 0.2, 0.4])

    def test_beyond_095(self) -> None:
        with pytest.raises(GridTooSmall):
            bootstrap_pi0(uniform_pvalues(100), grid=[0.1, 0.5, 0.9, 0.99])


class TestSmoothingSpline:
    def test_full_dof_interpolates(self) -> None:
        x = np.linspace(0.0, 1.0, 8)
        y = np.sin(5 * x)
        np.testing.assert_array_equal(smoothing_spline_fit(x, y, dof=8), y)

    def test_lines_are_reproduced(self) -> None:
        x = default_grid()
        y = 0.3 - 0.7 * x
        np.testing.assert_allclose(smoothing_spline_fit(x, y, dof=3), y, atol=1e-6)
        np.testing.assert_allclose(smoothing_spline_fit(x, y, dof=2), y, atol=1e-10)

    def test_trace_equals_dof(self) -> None:
        x = np.linspace(0.0, 0.95, 20)
        basis = np.eye(20)
        trace = sum(smoothing_spline_fit(x, basis[i], dof=3.0)[i] for i in range(20))
        assert trace == pytest.approx(3.0, abs=1e-6)


class TestSmoother:
    def test_uniform(self) -> None:
        est = smoother_pi0(uniform_pvalues(100_000))
        assert 0.95 <= est.pi0_hat <= 1.0
        assert est.method == Pi0Method.SMOOTHER
        assert est.selected_lambda == 0.95
        assert est.smoothed.shape == est.curve.shape

    def test_all_small_pvalues(self) -> None:
        p = np.linspace(0.001, 0.01, 50)
        est = smoother_pi0(p, grid=lambda_grid(0.02, 0.95, 0.01))
        assert est.pi0_hat == 0.0

    def test_mixture(self) -> None:
        est = smoother_pi0(mixture_pvalues(100_000, 0.8, 3.0))
        assert est.pi0_hat == pytest.approx(0.8, abs=0.05)


class TestBootstrap:
    def test_identical_pvalues(self) -> None:
        est = bootstrap_pi0(np.full(50, 0.3), B=20, seed=1)
        assert est.selected_lambda == pytest.approx(0.3)
        assert est.pi0_hat == 0.0

    def test_uniform(self) -> None:
        est = bootstrap_pi0(uniform_pvalues(100_000), B=100, seed=5)
        assert 0.9 <= est.pi0_hat <= 1.0

    def test_mixture(self) -> None:
        est = bootstrap_pi0(mixture_pvalues(100_000, 0.8, 3.0), B=50, seed=6)
        assert est.pi0_hat == pytest.approx(0.8, abs=0.05)

    def test_seeded(self) -> None:
        p = mixture_pvalues(2_000, 0.9, 2.5)
        a = bootstrap_pi0(p, B=30, seed=8)
        b = bootstrap_pi0(p, B=30, seed=8)
        np.testing.assert_array_equal(a.mse, b.mse)
        assert a.pi0_hat == b.pi0_hat

    def test_threads_do_not_change_result(self) -> None:
        p = mixture_pvalues(2_000, 0.9, 2.5)
        serial = bootstrap_pi0(p, B=30, seed=8, threads=1)
        parallel = bootstrap_pi0(p, B=30, seed=8, threads=4)
        np.testing.assert_array_equal(serial.mse, parallel.mse)

    def test_needs_ten_resamples(self) -> None:
        with pytest.raises(ValueError):
            bootstrap_pi0(uniform_pvalues(100), B=5)


def test_estimate_pi0_selection() -> None:
    p = uniform_pvalues(500)
    both = estimate_pi0(p, Pi0Selection.BOTH, B=10)
    assert set(both) == {Pi0Method.SMOOTHER, Pi0Method.BOOTSTRAP}
    assert set(estimate_pi0(p, Pi0Selection.SMOOTHER)) == {Pi0Method.SMOOTHER}
    bootstrap_only = estimate_pi0(p, Pi0Selection.BOOTSTRAP, B=10, seed=3)
    assert bootstrap_only[Pi0Method.BOOTSTRAP].seed == 3


def test_bias_curve_under_null() -> None:
    curve = pi0_bias_curve(uniform_pvalues(100_000))
    assert curve[0] == 1.0
    np.testing.assert_allclose(curve[default_grid() <= 0.9], 1.0, atol=0.05)


class TestEcdf:
    def test_single_point(self) -> None:
        e = ecdf([0.5])
        assert e(0.49) == 0.0
        assert e(0.5) == 1.0
        assert e(1.0) == 1.0

    def test_ties(self) -> None:
        e = ecdf([0.2, 0.2, 0.7, 0.9])
        np.testing.assert_array_equal(e.support, [0.2, 0.7, 0.9])
        np.testing.assert_allclose(e.heights, [0.5, 0.75, 1.0])
        np.testing.assert_allclose(e.left_limits(), [0.0, 0.5, 0.75])

    def test_ks_of_itself_is_zero(self) -> None:
        e = ecdf(uniform_pvalues(300))
        assert ks_distance(e, e) == 0.0

    def test_ks_uniform_sample(self) -> None:
        assert ks_distance(ecdf(uniform_pvalues(10_000)), uniform_cdf) < 0.02

    def test_ks_single_point(self) -> None:
        assert ks_distance(ecdf([0.5]), uniform_cdf) == pytest.approx(0.5)
