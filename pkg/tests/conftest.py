"""Shared fixtures for the ggmc tests."""

from pathlib import Path

import numpy as np
import pytest

from ggmc.designs import block_equicorr, band_precision
from ggmc.models import GraphModel
from ggmc.sampler import sample_mvn, write_samples_csv


def identity_model(k: int) -> GraphModel:
    """Omega = Sigma = I_k (block design with singleton blocks)."""
    return block_equicorr(k, 1, 0.5)


def diagonal_model(diag) -> GraphModel:
    diag = np.asarray(diag, dtype=float)
    return GraphModel(
        k=diag.size,
        sigma=np.diag(diag),
        omega=np.diag(1.0 / diag),
        edges=(),
        pi0_true=1.0,
        c0_bound=float(max(diag.max(), (1.0 / diag).max())),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(seed=2026)


@pytest.fixture
def band5() -> GraphModel:
    return band_precision(5)


@pytest.fixture
def null_samples():
    """200 x 20 draws from N(0, I)."""
    return sample_mvn(identity_model(20), 200, seed=7)


@pytest.fixture
def null_csv(tmp_path: Path) -> Path:
    """CSV of 200 x 50 draws from N(0, I)."""
    path = tmp_path / "null.csv"
    write_samples_csv(sample_mvn(identity_model(50), 200, seed=11), str(path))
    return path


@pytest.fixture
def block_csv(tmp_path: Path) -> Path:
    """CSV of 300 x 20 draws from a block-equicorrelated design (s = 4, rho = 0.6)."""
    path = tmp_path / "block.csv"
    write_samples_csv(sample_mvn(block_equicorr(20, 4, 0.6), 300, seed=3), str(path))
    return path
