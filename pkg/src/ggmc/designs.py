"""
Covariance/precision designs of the simulation studies.

Each generator returns a GraphModel whose edge set and pi0 are counted from
the support of Omega. The nominal pi0 quoted for each design is carried
alongside; for AR(1) blocks and the band graph the two differ.
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from .errors import InvalidSpec
from .linalg import eigenvalue_range, invert_spd
from .models import C1Report, DesignTag, GraphModel, ModelSpec
from .sampler import STREAM_GRAPH, rng_for

logger = logging.getLogger(__name__)

EDGE_TOL = 1e-12
ER_EIGEN_FLOOR = 0.05
C1_RATE_LIMIT = 0.1


def edges_from_omega(omega: np.ndarray, tol: float = EDGE_TOL) -> Tuple[Tuple[int, int], ...]:
    """Upper-triangular pairs (i, j), i < j, with |omega_ij| > tol."""
    rows, cols = np.nonzero(np.triu(np.abs(omega) > tol, k=1))
    return tuple((int(i), int(j)) for i, j in zip(rows, cols))


def _finish(
    sigma: np.ndarray,
    omega: np.ndarray,
    tag: Optional[DesignTag],
    nominal: Optional[float],
    spec: Optional[ModelSpec] = None,
    pd_shift: float = 0.0,
) -> GraphModel:
    k = sigma.shape[0]
    edges = edges_from_omega(omega)
    n_pairs = k * (k - 1) // 2
    pi0_true = 1.0 - len(edges) / n_pairs
    c0_bound = max(float(np.max(np.diag(sigma))), float(np.max(np.diag(omega))))
    if nominal is not None and abs(nominal - pi0_true) > 1e-9:
        logger.info(
            "%s k=%d: counted pi0 %.4f differs from nominal %.4f",
            tag.value if tag else "model",
            k,
            pi0_true,
            nominal,
        )
    return GraphModel(
        k=k,
        sigma=sigma,
        omega=omega,
        edges=edges,
        pi0_true=pi0_true,
        pi0_nominal=nominal,
        design_tag=tag,
        c0_bound=c0_bound,
        spec=spec,
        pd_shift=pd_shift,
    )


def _check_block(k: int, s: int, rho: float) -> None:
    if s < 1 or k < 2:
        raise InvalidSpec(f"need k >= 2 and s >= 1, got k={k}, s={s}")
    if k % s != 0:
        raise InvalidSpec(f"block size s={s} does not divide k={k}")
    if not 0.0 < rho < 1.0:
        raise InvalidSpec(f"rho={rho} must lie in (0, 1)")


def block_nominal_pi0(k: int, s: int) -> float:
    return 1.0 - (s - 1) / (k - 1)


def block_equicorr(k: int, s: int, rho: float) -> GraphModel:
    """
    Block-diagonal Sigma with equicorrelated blocks of size s.

    Each block is (1 - rho) I + rho J; its inverse is dense within the block,
    so every within-block pair is an edge.
    """
    _check_block(k, s, rho)
    block = (1.0 - rho) * np.eye(s) + rho * np.ones((s, s))
    inv_block = (np.eye(s) - rho / (1.0 + (s - 1) * rho) * np.ones((s, s))) / (1.0 - rho)
    b = k // s
    sigma = scipy.linalg.block_diag(*([block] * b))
    omega = scipy.linalg.block_diag(*([inv_block] * b))
    spec = ModelSpec(design_tag=DesignTag.BLOCK_EQUICORR, k=k, s=s, rho=rho)
    return _finish(sigma, omega, DesignTag.BLOCK_EQUICORR, block_nominal_pi0(k, s), spec)


def _ar1_precision(s: int, rho: float) -> np.ndarray:
    if s == 1:
        return np.ones((1, 1))
    diag = np.full(s, 1.0 + rho**2)
    diag[0] = diag[-1] = 1.0
    prec = np.diag(diag) - rho * (np.eye(s, k=1) + np.eye(s, k=-1))
    return prec / (1.0 - rho**2)


def block_ar1(k: int, s: int, rho: float) -> GraphModel:
    """
    Block-diagonal Sigma with AR(1) blocks, sigma_ij = rho^|i-j| within a block.

    The block precision is tridiagonal (closed form), so the graph has
    b(s - 1) edges rather than the nominal b s(s - 1)/2.
    """
    _check_block(k, s, rho)
    idx = np.arange(s)
    block = rho ** np.abs(idx[:, None] - idx[None, :])
    b = k // s
    sigma = scipy.linalg.block_diag(*([block] * b))
    omega = scipy.linalg.block_diag(*([_ar1_precision(s, rho)] * b))
    spec = ModelSpec(design_tag=DesignTag.BLOCK_AR1, k=k, s=s, rho=rho)
    return _finish(sigma, omega, DesignTag.BLOCK_AR1, block_nominal_pi0(k, s), spec)


def band_precision(k: int) -> GraphModel:
    """
    Band graph: omega_ii = 1, 0.6 at |i-j| = 1, 0.3 at |i-j| = 2, zero elsewhere.

    The nominal pi0 printed with this design is 1 - 2/k; the counted edge set
    has (k - 1) + (k - 2) pairs.
    """
    if k < 3:
        raise InvalidSpec(f"the band graph needs k >= 3, got k={k}")
    omega = np.eye(k) + 0.6 * (np.eye(k, k=1) + np.eye(k, k=-1)) + 0.3 * (
        np.eye(k, k=2) + np.eye(k, k=-2)
    )
    sigma = invert_spd(omega)
    spec = ModelSpec(design_tag=DesignTag.BAND, k=k)
    return _finish(sigma, omega, DesignTag.BAND, 1.0 - 2.0 / k, spec)


def tridiagonal_covariance(k: int, rho: float = 0.3) -> GraphModel:
    """
    Sigma with unit diagonal and rho on the first off-diagonals (1-banded).
    Omega is dense, its entries decaying geometrically away from the diagonal.
    """
    if k < 2:
        raise InvalidSpec(f"need k >= 2, got k={k}")
    if not abs(rho) < 0.5:
        raise InvalidSpec(f"rho={rho} must satisfy |rho| < 1/2")
    sigma = np.eye(k) + rho * (np.eye(k, k=1) + np.eye(k, k=-1))
    return _finish(sigma, invert_spd(sigma), None, None)


def default_er_q(k: int) -> float:
    """Edge probability of the sparsity-scaling Erdos-Renyi design."""
    return min(0.05, 5.0 / k)


def erdos_renyi_precision(
    k: int,
    q: Optional[float] = None,
    u_range: Tuple[float, float] = (0.4, 0.8),
    seed: int = 0,
) -> GraphModel:
    """
    Erdos-Renyi precision: b_ij = u_ij * delta_ij with delta ~ Bernoulli(q).

    If the smallest eigenvalue of B is at most 0.05, B is shifted by
    (|lambda_min| + 0.05) I; the result is rescaled to unit diagonal. Both
    steps keep the zero pattern, so the edge set is exactly the drawn one.

    Args:
        k: Number of variables
        q: Edge probability, default min(0.05, 5/k)
        u_range: Range of the uniform weights
        seed: Graph seed (graph stream)

    Returns:
        GraphModel: pd_shift records the applied eigenvalue shift
    """
    q = default_er_q(k) if q is None else q
    lo, hi = u_range
    if k < 2 or not 0.0 < q < 1.0:
        raise InvalidSpec(f"need k >= 2 and 0 < q < 1, got k={k}, q={q}")
    if not lo < hi:
        raise InvalidSpec(f"u_range must satisfy u_lo < u_hi, got {u_range}")

    rng = rng_for(seed, STREAM_GRAPH)
    rows, cols = np.triu_indices(k, k=1)
    delta = rng.random(rows.size) < q
    u = rng.uniform(lo, hi, rows.size)

    B = np.eye(k)
    B[rows, cols] = u * delta
    B[cols, rows] = B[rows, cols]

    lam_min, _ = eigenvalue_range(B)
    shift = 0.0
    if lam_min <= ER_EIGEN_FLOOR:
        shift = abs(lam_min) + ER_EIGEN_FLOOR
        B = B + shift * np.eye(k)
    scale = 1.0 / np.sqrt(np.diag(B))
    omega = B * scale[:, None] * scale[None, :]
    omega = 0.5 * (omega + omega.T)
    np.fill_diagonal(omega, 1.0)

    sigma = invert_spd(omega)
    spec = ModelSpec(design_tag=DesignTag.ERDOS_RENYI, k=k, q=q, u_range=u_range, seed=seed)
    return _finish(sigma, omega, DesignTag.ERDOS_RENYI, 1.0 - q, spec, pd_shift=shift)


def nominal_pi0(spec: ModelSpec) -> float:
    """Nominal pi0: 1 - (s-1)/(k-1) for blocks, 1 - 2/k for the band graph, 1 - q for Erdos-Renyi."""
    if spec.design_tag in (DesignTag.BLOCK_AR1, DesignTag.BLOCK_EQUICORR):
        return block_nominal_pi0(spec.k, spec.s)
    if spec.design_tag == DesignTag.BAND:
        return 1.0 - 2.0 / spec.k
    q = default_er_q(spec.k) if spec.q is None else spec.q
    return 1.0 - q


def block_size_for_pi0(k: int, pi0: float) -> int:
    """
    Divisor of k whose block design is closest to a nominal pi0.

    Example:
        k=100 and pi0 0.80 / 0.90 / 0.95 give s = 20 / 10 / 5.
    """
    target = 1.0 + (1.0 - pi0) * (k - 1)
    divisors = [d for d in range(1, k + 1) if k % d == 0]
    return min(divisors, key=lambda d: (abs(d - target), d))


def build_model(spec: ModelSpec) -> GraphModel:
    """Dispatch a ModelSpec to its generator."""
    if spec.design_tag == DesignTag.BLOCK_EQUICORR:
        return block_equicorr(spec.k, spec.s, spec.rho)
    if spec.design_tag == DesignTag.BLOCK_AR1:
        return block_ar1(spec.k, spec.s, spec.rho)
    if spec.design_tag == DesignTag.BAND:
        return band_precision(spec.k)
    return erdos_renyi_precision(spec.k, spec.q, spec.u_range, spec.seed or 0)


def validate_c1(model: GraphModel, n: int, c0: float = 10.0) -> C1Report:
    """
    Advisory check of condition (C1): bounded diagonals and log k = o(n).

    Never raises; a flagged report is logged as a warning.
    """
    max_sigma = float(np.max(np.diag(model.sigma)))
    max_omega = float(np.max(np.diag(model.omega)))
    bounded = max_sigma <= c0 and max_omega <= c0
    log_k = math.log(model.k)
    report = C1Report(
        max_sigma_diag=max_sigma,
        max_omega_diag=max_omega,
        c0=c0,
        bounded=bounded,
        log_k_over_n=log_k / n,
        log_k_over_sqrt_n=log_k / math.sqrt(n),
        flagged=(not bounded) or (log_k / n > C1_RATE_LIMIT),
    )
    if report.flagged:
        logger.warning(
            "Condition (C1) advisory: max sigma_ii=%.3f, max omega_ii=%.3f, c0=%.3f, log(k)/n=%.3f",
            max_sigma,
            max_omega,
            c0,
            report.log_k_over_n,
        )
    return report
