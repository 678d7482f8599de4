"""
Dense symmetric linear algebra primitives.

Matrices are plain 2-D numpy arrays; symmetric inputs are checked and then
symmetrised so that the upper and lower triangles agree exactly. All
tolerances scale with the dimension k.
"""

import logging

import numpy as np
import scipy.linalg
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from .errors import NotPositiveDefinite
from .models import CholeskyFactor

logger = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-12


def as_symmetric(S: np.ndarray) -> np.ndarray:
    """
    Validate that S is square and symmetric, and return its exact symmetrisation.

    Args:
        S: Square matrix

    Returns:
        np.ndarray: (S + S^T) / 2 as a float array

    Raises:
        ValueError: If S is not square or not symmetric within 1e-12 relative
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {S.shape}")
    scale = max(float(np.max(np.abs(S))), 1.0)
    if not np.allclose(S, S.T, rtol=0.0, atol=SYMMETRY_RTOL * scale):
        raise ValueError("matrix is not symmetric")
    return 0.5 * (S + S.T)


def cholesky(S: np.ndarray, max_tries: int = 0) -> CholeskyFactor:
    """
    Lower Cholesky factor of a symmetric matrix, with an explicit jitter ladder.

    The first attempt factors S as given. Each retry adds jitter * I, starting
    at 1e-10 * trace(S) / k and growing by 10x per retry; the jitter actually
    used is reported on the result and logged.

    Args:
        S: Symmetric matrix
        max_tries: Number of jitter escalations allowed (0 = no jitter)

    Returns:
        CholeskyFactor: L with L L^T = S + jitter * I

    Raises:
        NotPositiveDefinite: If every attempt fails
    """
    S = as_symmetric(S)
    k = S.shape[0]
    base = 1e-10 * float(np.trace(S)) / k
    if base <= 0.0:
        max_tries = 0
    eye = np.eye(k)
    state = {"jitter": 0.0, "attempts": 0}

    try:
        for attempt in Retrying(
            stop=stop_after_attempt(max_tries + 1),
            retry=retry_if_exception_type(np.linalg.LinAlgError),
            reraise=True,
        ):
            with attempt:
                number = attempt.retry_state.attempt_number
                jitter = 0.0 if number == 1 else base * 10.0 ** (number - 2)
                state["jitter"], state["attempts"] = jitter, number
                if jitter > 0.0:
                    logger.warning("Cholesky retry %d with jitter %.3e", number - 1, jitter)
                shifted = S + jitter * eye
                lower = scipy.linalg.cholesky(shifted, lower=True, check_finite=True)
                _check_reconstruction(lower, shifted)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefinite(
            f"Cholesky factorization failed after {state['attempts']} attempt(s)",
            jitter_tried=state["jitter"],
        ) from e

    return CholeskyFactor(lower=lower, jitter=state["jitter"], attempts=state["attempts"])


def _check_reconstruction(lower: np.ndarray, target: np.ndarray) -> None:
    k = target.shape[0]
    denom = np.linalg.norm(target, "fro")
    err = np.linalg.norm(lower @ lower.T - target, "fro") / denom if denom > 0 else 0.0
    if not np.isfinite(err) or err > 1e-10 * k:
        raise np.linalg.LinAlgError(f"reconstruction error {err:.3e} above tolerance")


def invert_spd(S: np.ndarray) -> np.ndarray:
    """
    Inverse of a symmetric positive definite matrix via a Cholesky solve.

    Args:
        S: SPD matrix

    Returns:
        np.ndarray: Symmetric inverse

    Raises:
        NotPositiveDefinite: If S cannot be factored
    """
    S = as_symmetric(S)
    try:
        factor = scipy.linalg.cho_factor(S, lower=True)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefinite("matrix is not positive definite; cannot invert") from e
    inv = scipy.linalg.cho_solve(factor, np.eye(S.shape[0]))
    return 0.5 * (inv + inv.T)


def eigenvalue_range(S: np.ndarray) -> tuple:
    """Smallest and largest eigenvalue of a symmetric matrix."""
    values = scipy.linalg.eigvalsh(as_symmetric(S))
    return float(values[0]), float(values[-1])


def condition_number(S: np.ndarray) -> float:
    """
    Spectral condition number lambda_max / lambda_min of an SPD matrix.

    Raises:
        NotPositiveDefinite: If the smallest eigenvalue is not positive
    """
    lo, hi = eigenvalue_range(S)
    if lo <= 0.0:
        raise NotPositiveDefinite(f"smallest eigenvalue {lo:.3e} is not positive")
    return hi / lo
