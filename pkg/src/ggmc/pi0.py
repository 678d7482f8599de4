"""
Storey / Schweder-Spjotvoll estimation of the proportion of true nulls.

    pi0_hat(lambda) = W(lambda) / (N (1 - lambda)),   W(lambda) = #{p > lambda}

Two rules pick the final estimate from the curve over a lambda grid: a
natural cubic smoothing spline evaluated at the right end of the grid, and
the bootstrap MSE criterion. ECDF and Kolmogorov-Smirnov helpers live here
as well.
"""

import logging
import math
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import scipy.linalg
from joblib import Parallel, delayed
from scipy.optimize import brentq

from .config import thread_count
from .errors import GridTooSmall, InvalidLambda
from .models import Ecdf, Pi0Estimate, Pi0Method, Pi0Selection, PValueSet
from .sampler import STREAM_BOOTSTRAP, rng_for

logger = logging.getLogger(__name__)

GRID_MAX = 0.95
MIN_GRID_POINTS = 4


def default_grid() -> np.ndarray:
    """{0, 0.01, ..., 0.95}."""
    return np.round(np.arange(96) * 0.01, 2)


def lambda_grid(lo: float = 0.0, hi: float = GRID_MAX, step: float = 0.01) -> np.ndarray:
    """Evenly spaced grid from lo to hi inclusive (hi kept when it lies on the lattice)."""
    if step <= 0:
        raise GridTooSmall("grid step must be positive")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(count), 12)


def _as_pvalues(p) -> PValueSet:
    return p if isinstance(p, PValueSet) else PValueSet(values=p)


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < MIN_GRID_POINTS:
        raise GridTooSmall(f"lambda grid needs at least {MIN_GRID_POINTS} points, got {grid.size}")
    if np.any(np.diff(grid) <= 0):
        raise GridTooSmall("lambda grid must be strictly increasing")
    if grid[0] < 0.0 or grid[-1] > GRID_MAX + 1e-12:
        raise GridTooSmall(f"lambda grid must lie in [0, {GRID_MAX}]")
    return grid


def storey_pi0(p, lam: float) -> float:
    """
    Raw Storey estimate #{p > lambda} / (N (1 - lambda)), not clamped.

    Raises:
        InvalidLambda: If lambda is outside [0, 1)
    """
    if not 0.0 <= lam < 1.0:
        raise InvalidLambda(f"lambda={lam} must lie in [0, 1)")
    values = _as_pvalues(p).values
    return int(np.count_nonzero(values > lam)) / (values.size * (1.0 - lam))


def pi0_curve(p, grid) -> Tuple[np.ndarray, np.ndarray]:
    """
    Tail counts W(lambda) and raw estimates pi0_hat(lambda) over a grid.

    Returns:
        Tuple of (W, curve)
    """
    values = np.sort(_as_pvalues(p).values)
    grid = np.asarray(grid, dtype=float)
    if np.any(grid < 0.0) or np.any(grid >= 1.0):
        raise InvalidLambda("every lambda must lie in [0, 1)")
    W = values.size - np.searchsorted(values, grid, side="right")
    return W, W / (values.size * (1.0 - grid))


def pi0_bias_curve(p, grid=None) -> np.ndarray:
    """Raw pi0_hat(lambda) curve for bias diagnostics."""
    return pi0_curve(p, default_grid() if grid is None else grid)[1]


def fixed_lambda_pi0(p, lam: float = 0.5) -> Pi0Estimate:
    """Storey estimate at a single lambda, clamped to [0, 1]."""
    raw = storey_pi0(p, lam)
    W, curve = pi0_curve(p, [lam])
    return Pi0Estimate(
        method=Pi0Method.FIXED_LAMBDA,
        lambda_grid=np.array([lam]),
        curve=curve,
        W=W,
        pi0_hat=float(min(max(raw, 0.0), 1.0)),
        selected_lambda=lam,
    )


# ====================
# Smoothing spline
# ====================

def _roughness_matrix(x: np.ndarray) -> np.ndarray:
    """K = Q R^{-1} Q^T of the natural cubic smoothing spline with knots x."""
    n = x.size
    h = np.diff(x)
    Q = np.zeros((n, n - 2))
    R = np.zeros((n - 2, n - 2))
    for j in range(n - 2):
        Q[j, j] = 1.0 / h[j]
        Q[j + 1, j] = -1.0 / h[j] - 1.0 / h[j + 1]
        Q[j + 2, j] = 1.0 / h[j + 1]
        R[j, j] = (h[j] + h[j + 1]) / 3.0
        if j + 1 < n - 2:
            R[j, j + 1] = R[j + 1, j] = h[j + 1] / 6.0
    K = Q @ scipy.linalg.solve(R, Q.T, assume_a="pos")
    return 0.5 * (K + K.T)


def smoothing_spline_fit(x, y, dof: float = 3.0) -> np.ndarray:
    """
    Fitted values of the natural cubic smoothing spline with the given
    effective degrees of freedom (trace of the hat matrix).

    The penalty alpha in (I + alpha K)^{-1} y is solved from
    sum_i 1 / (1 + alpha d_i) = dof over the eigenvalues d_i of K.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < MIN_GRID_POINTS:
        raise GridTooSmall(f"spline smoothing needs at least {MIN_GRID_POINTS} points")
    if dof >= n:
        return y.copy()

    evals, evecs = scipy.linalg.eigh(_roughness_matrix(x))
    evals = np.clip(evals, 0.0, None)
    if dof <= 2.0:
        # limit alpha -> infinity: least-squares line
        slope, intercept = np.polyfit(x, y, 1)
        return slope * x + intercept

    def excess(log_alpha: float) -> float:
        return float(np.sum(1.0 / (1.0 + math.exp(log_alpha) * evals))) - dof

    lo, hi = -40.0, 40.0
    while excess(lo) < 0:
        lo -= 20.0
    while excess(hi) > 0:
        hi += 20.0
    alpha = math.exp(brentq(excess, lo, hi, xtol=1e-12))
    coords = evecs.T @ y
    return evecs @ (coords / (1.0 + alpha * evals))


def smoother_pi0(p, grid=None, spline_dof: float = 3.0) -> Pi0Estimate:
    """
    Smoothing-spline selector: fit a cubic smoothing spline with spline_dof
    degrees of freedom to pi0_hat(lambda) and evaluate it at max(grid).

    Raises:
        GridTooSmall: If the grid is too short, unsorted or outside [0, 0.95]
    """
    grid = _check_grid(default_grid() if grid is None else grid)
    W, curve = pi0_curve(p, grid)
    smoothed = smoothing_spline_fit(grid, curve, spline_dof)
    pi0_hat = float(min(max(smoothed[-1], 0.0), 1.0))
    return Pi0Estimate(
        method=Pi0Method.SMOOTHER,
        lambda_grid=grid,
        curve=curve,
        W=W,
        pi0_hat=pi0_hat,
        selected_lambda=float(grid[-1]),
        spline_dof=spline_dof,
        smoothed=smoothed,
    )


# ====================
# Bootstrap
# ====================

def _grid_position(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Number of grid points strictly below each p-value (p > lambda_g iff g < m)."""
    return np.searchsorted(grid, values, side="left")


def _bootstrap_curve(position: np.ndarray, grid: np.ndarray, seed: int) -> np.ndarray:
    N = position.size
    rng = rng_for(seed, STREAM_BOOTSTRAP)
    draws = rng.integers(0, N, size=N)
    counts = np.bincount(position[draws], minlength=grid.size + 1)
    tail = np.cumsum(counts[::-1])[::-1]
    return tail[1:] / (N * (1.0 - grid))


def bootstrap_pi0(
    p,
    grid=None,
    B: int = 100,
    seed: int = 0,
    threads: Optional[int] = None,
) -> Pi0Estimate:
    """
    Bootstrap MSE selector.

    With the plug-in pi0* = min_lambda pi0_hat(lambda), resample the N p-values
    B times (resample b uses seed + b), estimate
    MSE(lambda) = mean_b (pi0_hat^b(lambda) - pi0*)^2, pick the smallest
    minimiser lambda* and return min(1, pi0_hat(lambda*)).
    """
    if B < 10:
        raise ValueError("the bootstrap needs B >= 10 resamples")
    grid = _check_grid(default_grid() if grid is None else grid)
    values = _as_pvalues(p).values
    W, curve = pi0_curve(values, grid)
    plug_in = float(np.min(curve))
    position = _grid_position(values, grid)

    workers = min(threads or thread_count(), B)
    seeds = [seed + b for b in range(1, B + 1)]
    if workers <= 1:
        curves = [_bootstrap_curve(position, grid, s) for s in seeds]
    else:
        curves = Parallel(n_jobs=workers, prefer="threads")(
            delayed(_bootstrap_curve)(position, grid, s) for s in seeds
        )

    mse = np.mean((np.vstack(curves) - plug_in) ** 2, axis=0)
    best = int(np.argmin(mse))
    pi0_hat = float(min(max(curve[best], 0.0), 1.0))
    logger.debug("Bootstrap selected lambda=%.2f, pi0=%.4f", grid[best], pi0_hat)
    return Pi0Estimate(
        method=Pi0Method.BOOTSTRAP,
        lambda_grid=grid,
        curve=curve,
        W=W,
        pi0_hat=pi0_hat,
        selected_lambda=float(grid[best]),
        mse=mse,
        B=B,
        seed=seed,
    )


def estimate_pi0(
    p,
    selection: Pi0Selection = Pi0Selection.BOTH,
    grid=None,
    B: int = 100,
    seed: int = 0,
    spline_dof: float = 3.0,
    threads: Optional[int] = None,
) -> Dict[Pi0Method, Pi0Estimate]:
    """Run the requested selector(s); keys are the Pi0Method of each estimate."""
    out: Dict[Pi0Method, Pi0Estimate] = {}
    if selection in (Pi0Selection.SMOOTHER, Pi0Selection.BOTH):
        out[Pi0Method.SMOOTHER] = smoother_pi0(p, grid, spline_dof)
    if selection in (Pi0Selection.BOOTSTRAP, Pi0Selection.BOTH):
        out[Pi0Method.BOOTSTRAP] = bootstrap_pi0(p, grid, B, seed, threads)
    return out


# ====================
# ECDF utilities
# ====================

def ecdf(p) -> Ecdf:
    """Right-continuous ECDF of the p-values."""
    values = _as_pvalues(p).values
    support, counts = np.unique(values, return_counts=True)
    return Ecdf(support=support, heights=np.cumsum(counts) / values.size)


def ks_distance(e: Ecdf, F: Callable) -> float:
    """
    sup_x |F_N(x) - F(x)| for a continuous (or step) CDF F, evaluated at the
    jump points of F_N using both one-sided gaps.
    """
    def evaluate(x: np.ndarray) -> np.ndarray:
        out = np.asarray(F(x), dtype=float)
        if out.shape != x.shape:
            out = np.array([float(F(v)) for v in x])
        return out

    right = evaluate(e.support)
    left = evaluate(np.nextafter(e.support, -np.inf))
    upper = np.max(np.abs(e.heights - right))
    lower = np.max(np.abs(left - e.left_limits()))
    return float(max(upper, lower))


def uniform_cdf(x):
    return np.clip(x, 0.0, 1.0)
