"""Tests for ggmc.designs: the simulation designs and the C1 advisory check."""

import math

import numpy as np
import pydantic
import pytest

from ggmc.designs import (
    band_precision,
    block_ar1,
    block_equicorr,
    block_size_for_pi0,
    build_model,
    edges_from_omega,
    erdos_renyi_precision,
    nominal_pi0,
    tridiagonal_covariance,
    validate_c1,
)
from ggmc.errors import InvalidSpec
from ggmc.linalg import eigenvalue_range
from ggmc.models import DesignTag, ModelSpec
from tests.conftest import identity_model


def assert_inverse_pair(model) -> None:
    np.testing.assert_allclose(model.sigma @ model.omega, np.eye(model.k), atol=1e-8 * model.k)


class TestBlockEquicorr:
    def test_two_blocks_of_two(self) -> None:
        model = block_equicorr(4, 2, 0.5)
        assert model.edges == ((0, 1), (2, 3))
        assert 1.0 - model.pi0_true == pytest.approx(1.0 / 3.0)
        assert model.pi0_nominal == pytest.approx(2.0 / 3.0)
        assert_inverse_pair(model)

    def test_singleton_blocks_are_identity(self) -> None:
        model = block_equicorr(6, 1, 0.7)
        assert model.edges == ()
        assert model.pi0_true == 1.0
        np.testing.assert_allclose(model.omega, np.eye(6))

    def test_counted_matches_nominal(self) -> None:
        model = block_equicorr(100, 10, 0.5)
        assert model.pi0_true == pytest.approx(1.0 - 10 * 45 / 4950)
        assert model.pi0_true == pytest.approx(model.pi0_nominal)
        assert_inverse_pair(model)

    def test_block_size_must_divide_k(self) -> None:
        with pytest.raises(InvalidSpec):
            block_equicorr(100, 11, 0.5)

    @pytest.mark.parametrize("rho", [0.0, 1.0, -0.2])
    def test_rho_range(self, rho) -> None:
        with pytest.raises(InvalidSpec):
            block_equicorr(10, 5, rho)


class TestBlockAR1:
    def test_small_blocks_match_equicorr_edges(self) -> None:
        assert block_ar1(4, 2, 0.5).edges == block_equicorr(4, 2, 0.5).edges

    def test_precision_is_tridiagonal_within_blocks(self) -> None:
        model = block_ar1(6, 3, 0.5)
        assert model.edges == ((0, 1), (1, 2), (3, 4), (4, 5))
        assert model.omega[0, 2] == 0.0
        assert_inverse_pair(model)

    def test_counted_pi0_differs_from_nominal(self) -> None:
        model = block_ar1(100, 20, 0.5)
        assert len(model.edges) == 5 * 19
        assert model.pi0_true == pytest.approx(1.0 - 95 / 4950)
        assert model.pi0_nominal == pytest.approx(1.0 - 19 / 99)


class TestBand:
    def test_k5(self, band5) -> None:
        assert len(band5.edges) == 7
        assert 1.0 - band5.pi0_true == pytest.approx(0.7)
        assert_inverse_pair(band5)

    def test_k3_omega(self) -> None:
        model = band_precision(3)
        expected = np.array([[1.0, 0.6, 0.3], [0.6, 1.0, 0.6], [0.3, 0.6, 1.0]])
        np.testing.assert_allclose(model.omega, expected)

    def test_k100_edge_count(self) -> None:
        model = band_precision(100)
        assert len(model.edges) == 99 + 98
        assert model.pi0_nominal == pytest.approx(0.98)

    def test_k2_rejected(self) -> None:
        with pytest.raises(InvalidSpec):
            band_precision(2)


class TestErdosRenyi:
    def test_vanishing_q_gives_identity(self) -> None:
        model = erdos_renyi_precision(20, q=1e-9, seed=1)
        assert model.edges == ()
        assert model.pd_shift == 0.0
        np.testing.assert_allclose(model.omega, np.eye(20))

    def test_unit_diagonal_and_eigen_floor(self) -> None:
        model = erdos_renyi_precision(100, q=0.05, seed=3)
        np.testing.assert_allclose(np.diag(model.omega), 1.0)
        lam_min, _ = eigenvalue_range(model.omega)
        assert lam_min > 0.0
        assert lam_min >= 0.05 / (1.0 + model.pd_shift) - 1e-10
        assert_inverse_pair(model)

    def test_edge_fraction_near_q(self) -> None:
        model = erdos_renyi_precision(100, q=0.05, seed=3)
        N = model.n_pairs
        fraction = len(model.edges) / N
        assert abs(fraction - 0.05) <= 4.0 * math.sqrt(0.05 * 0.95 / N)

    def test_edges_follow_the_support(self) -> None:
        model = erdos_renyi_precision(50, q=0.1, seed=9)
        assert model.edges == edges_from_omega(model.omega)
        assert all(i < j for i, j in model.edges)

    def test_graph_seed_determinism(self) -> None:
        a = erdos_renyi_precision(40, q=0.1, seed=5)
        b = erdos_renyi_precision(40, q=0.1, seed=5)
        c = erdos_renyi_precision(40, q=0.1, seed=6)
        assert a.edges == b.edges
        np.testing.assert_array_equal(a.omega, b.omega)
        assert a.edges != c.edges

    def test_default_q(self) -> None:
        assert erdos_renyi_precision(200, seed=0).spec.q == pytest.approx(0.025)

    @pytest.mark.parametrize("q", [0.0, 1.0])
    def test_q_range(self, q) -> None:
        with pytest.raises(InvalidSpec):
            erdos_renyi_precision(10, q=q)


class TestTridiagonalCovariance:
    def test_sigma_is_one_banded(self) -> None:
        model = tridiagonal_covariance(6, 0.3)
        dist = np.abs(np.subtract.outer(np.arange(6), np.arange(6)))
        np.testing.assert_array_equal(model.sigma[dist > 1], 0.0)
        assert_inverse_pair(model)

    def test_rho_limit(self) -> None:
        with pytest.raises(InvalidSpec):
            tridiagonal_covariance(6, 0.6)


class TestModelSpec:
    def test_block_needs_s_and_rho(self) -> None:
        with pytest.raises(pydantic.ValidationError):
            ModelSpec(design_tag=DesignTag.BLOCK_EQUICORR, k=10)

    def test_block_size_divides_k(self) -> None:
        with pytest.raises(pydantic.ValidationError):
            ModelSpec(design_tag=DesignTag.BLOCK_AR1, k=10, s=3, rho=0.5)

    def test_build_model_dispatch(self) -> None:
        spec = ModelSpec(design_tag=DesignTag.BLOCK_AR1, k=12, s=4, rho=0.5)
        model = build_model(spec)
        assert model.design_tag == DesignTag.BLOCK_AR1
        assert model.edges == block_ar1(12, 4, 0.5).edges
        assert build_model(ModelSpec(design_tag=DesignTag.BAND, k=8)).k == 8

    def test_json_round_trip(self) -> None:
        spec = ModelSpec(design_tag=DesignTag.ERDOS_RENYI, k=30, q=0.1, seed=4)
        assert ModelSpec.model_validate_json(spec.model_dump_json()) == spec

    def test_nominal_pi0(self) -> None:
        assert nominal_pi0(ModelSpec(design_tag=DesignTag.BAND, k=100)) == pytest.approx(0.98)
        spec = ModelSpec(design_tag=DesignTag.BLOCK_EQUICORR, k=100, s=20, rho=0.5)
        assert nominal_pi0(spec) == pytest.approx(1.0 - 19 / 99)


@pytest.mark.parametrize("pi0, s", [(0.80, 20), (0.90, 10), (0.95, 5)])
def test_block_size_for_pi0(pi0, s) -> None:
    assert block_size_for_pi0(100, pi0) == s


class TestValidateC1:
    def test_identity_passes(self) -> None:
        report = validate_c1(identity_model(10), n=200, c0=2.0)
        assert report.bounded
        assert not report.flagged

    def test_band_exceeds_small_c0(self) -> None:
        report = validate_c1(band_precision(100), n=200, c0=1.0)
        assert report.max_sigma_diag > 1.0
        assert not report.bounded
        assert report.flagged

    def test_large_k_small_n_flagged(self) -> None:
        report = validate_c1(identity_model(3051), n=38)
        assert report.bounded
        assert report.log_k_over_n == pytest.approx(math.log(3051) / 38)
        assert report.flagged

    def test_never_raises(self, band5) -> None:
        report = validate_c1(band5, n=10, c0=1e-3)
        assert report.flagged
