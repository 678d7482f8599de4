"""
GFC edge-wise tests: residuals, bias-corrected statistics, two-sided p-values
and the FDR threshold t_hat.

For each pair i < j:

    T1_ij = r_ij + r_jj * beta_i[j] + r_ii * beta_j[i]
    T_ij  = sqrt(n / (r_ii r_jj)) * T1_ij
    p_ij  = 2 (1 - Phi(|T_ij|)) = erfc(|T_ij| / sqrt(2))

where r is the residual covariance with 1/n normalisation and beta_i[j] is the
coefficient of X_j in the regression of X_i. Each coefficient is weighted by
the residual variance of the variable it multiplies.
"""

import logging
import math
import time
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.special import erfc, erfcinv, ndtr, ndtri

from .errors import DegenerateResidual, DegenerateScale, MalformedInput
from .models import (
    FdrResult,
    FitReport,
    GfcMethod,
    GfcRun,
    GraphModel,
    KappaSelection,
    ResidualSet,
    SampleMatrix,
    TestResults,
)
from .regression import coef_matrix, fit_all_nodes
from .sampler import center

logger = logging.getLogger(__name__)

RESIDUAL_FLOOR = 1e-12
SQRT2 = math.sqrt(2.0)
MIN_N = 10
MIN_K = 3
TAIL_LEVELS = 10
# kappa = b / (20 sqrt 2), b = 1..40, i.e. lambda = b/20 * sd * sqrt(log k / n)
KAPPA_GRID = tuple(b / (20.0 * SQRT2) for b in range(1, 41))


def two_sided_tail(t):
    """G(t) = P(|Z| > t) = 2 (1 - Phi(t)), computed as erfc(t / sqrt 2)."""
    return erfc(np.abs(t) / SQRT2)


def two_sided_tail_inverse(x: float) -> float:
    """Smallest t >= 0 with G(t) <= x."""
    if x >= 1.0:
        return 0.0
    return float(SQRT2 * erfcinv(x))


def residuals(X: SampleMatrix, fit_report: FitReport) -> ResidualSet:
    """
    Node-wise residuals eps_i = (X_i - mean_i) - (X_-i - mean_-i) beta_i and
    their covariance r = eps^T eps / n.

    Raises:
        DegenerateResidual: If any r_ii <= 1e-12 var(X_i)
    """
    fits = fit_report.fits
    if len(fits) != X.k:
        raise ValueError(f"expected {X.k} node fits, got {len(fits)}")
    Xc = center(X)[0].values
    B = coef_matrix(fits)
    eps = Xc - Xc @ B.T
    r_hat = eps.T @ eps / X.n
    r_hat = 0.5 * (r_hat + r_hat.T)

    variances = np.mean(Xc**2, axis=0)
    diag = np.diag(r_hat)
    bad = np.nonzero(diag <= RESIDUAL_FLOOR * variances)[0]
    if bad.size:
        node = int(bad[0])
        raise DegenerateResidual(
            f"residual variance {diag[node]:.3e} of variable {node + 1} is not positive",
            node=node,
        )
    return ResidualSet(eps_hat=eps, r_hat=r_hat)


def t_statistics(res: ResidualSet, fit_report: FitReport) -> TestResults:
    """Bias-corrected pair statistics T1, T and two-sided p-values (upper triangle)."""
    r = res.r_hat
    n, k = res.eps_hat.shape
    B = coef_matrix(fit_report.fits)
    d = np.diag(r)
    if np.any(d <= 0.0):
        node = int(np.argmin(d))
        raise DegenerateResidual("non-positive residual variance", node=node)

    weighted = B * d[None, :]
    T1 = r + weighted + weighted.T
    scale = np.sqrt(n / np.outer(d, d))
    T = scale * T1

    rows, cols = np.triu_indices(k, k=1)
    t1 = T1[rows, cols]
    t = T[rows, cols]
    p = np.clip(two_sided_tail(t), 0.0, 1.0)
    return TestResults(
        k=k, n=n, rows=rows, cols=cols, t1=t1, t=t, p=p, method=fit_report.method
    )


def fdr_threshold(tr: TestResults, alpha: float) -> FdrResult:
    """
    t_hat = inf{0 <= t <= 2 sqrt(log k): G(t) N / max(1, R(t)) <= alpha},
    R(t) = #{|T_ij| > t}, falling back to 2 sqrt(log k) when the set is empty.

    R is constant between consecutive sorted |T| values, so on each such
    interval the smallest feasible t is max(left end, G^{-1}(alpha max(1, R)/N));
    the first interval where that point lies inside gives the exact infimum.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    N = tr.n_pairs
    bound = 2.0 * math.sqrt(math.log(tr.k))
    abs_t = np.abs(tr.t)
    sorted_t = np.sort(abs_t)

    breaks = np.unique(sorted_t[(sorted_t > 0.0) & (sorted_t <= bound)])
    lefts = np.concatenate(([0.0], breaks))
    rights = np.concatenate((breaks, [math.inf]))
    counts = N - np.searchsorted(sorted_t, lefts, side="right")
    targets = alpha * np.maximum(1, counts) / N
    inverse = np.where(targets >= 1.0, 0.0, SQRT2 * erfcinv(np.minimum(targets, 1.0)))
    candidates = np.maximum(lefts, inverse)
    feasible = np.nonzero((candidates < rights) & (candidates <= bound))[0]

    found = feasible.size > 0
    t_hat = float(candidates[feasible[0]]) if found else bound

    mask = abs_t > t_hat
    rejected = tuple(
        (int(i), int(j)) for i, j in zip(tr.rows[mask], tr.cols[mask])
    )
    if not found:
        logger.info("No threshold satisfies the FDR criterion; using 2 sqrt(log k) = %.4f", bound)
    return FdrResult(alpha=alpha, t_hat=float(t_hat), rejected=rejected, infimum_found=found)


def run_gfc(
    X: SampleMatrix,
    method: GfcMethod = GfcMethod.LASSO,
    kappa: float = 1.0,
    alpha: float = 0.1,
    threads: Optional[int] = None,
) -> GfcRun:
    """
    Full GFC pipeline: node-wise fits, residuals, statistics, FDR threshold.

    Args:
        X: n x k samples (n >= 10, k >= 3)
        method: GFC_L or GFC_SL
        kappa: Penalty multiplier
        alpha: FDR level
        threads: Worker count for the node fits

    Returns:
        GfcRun with provenance (seed, method, kappa, alpha, non-converged nodes)

    Raises:
        MalformedInput: If n < 10 or k < 3
    """
    _check_size(X)
    started = time.perf_counter()
    fit_report = fit_all_nodes(X, method, kappa, threads=threads)
    res = residuals(X, fit_report)
    tests = t_statistics(res, fit_report)
    fdr = fdr_threshold(tests, alpha)
    elapsed = time.perf_counter() - started
    logger.debug("GFC on %d x %d finished in %.2fs, %d rejections", X.n, X.k, elapsed, fdr.n_rejected)
    provenance: Dict[str, Any] = {
        "seed": X.seed,
        "model_tag": X.model_tag,
        "method": method.value,
        "kappa": kappa,
        "alpha": alpha,
        "n": X.n,
        "k": X.k,
        "not_converged": list(fit_report.not_converged),
    }
    return GfcRun(fit_report=fit_report, residuals=res, tests=tests, fdr=fdr, provenance=provenance)


def fdp_and_power(fdr: FdrResult, model: GraphModel) -> Tuple[float, float]:
    """False discovery proportion and true-edge recall of a rejection set."""
    truth = set(model.edges)
    rejected = set(fdr.rejected)
    false = len(rejected - truth)
    fdp = false / max(1, len(rejected))
    power = len(rejected & truth) / len(truth) if truth else 1.0
    return fdp, power


def null_statistics(tests: TestResults, model: GraphModel) -> Tuple[Optional[float], Optional[float]]:
    """Mean and standard deviation of T over the pairs that are not edges of the model."""
    truth = set(model.edges)
    null = np.array(
        [(int(i), int(j)) not in truth for i, j in zip(tests.rows, tests.cols)], dtype=bool
    )
    t = tests.t[null]
    if t.size == 0:
        return None, None
    sd = float(np.std(t, ddof=1)) if t.size > 1 else 0.0
    return float(np.mean(t)), sd


# ====================
# Tail-calibrated penalty
# ====================

def tail_calibration(t: np.ndarray, k: int) -> float:
    """
    sum_l (R_l / (2 N g_l) - 1)^2 for l = 1..10, where
    g_l = l (1 - Phi(sqrt(log k))) / 10 and R_l = #{|T_ij| >= Phi^{-1}(1 - g_l)}.

    Zero when the tail counts of |T| below sqrt(log k) match N(0, 1).
    """
    t = np.asarray(t, dtype=float)
    N = t.size
    g = np.arange(1, TAIL_LEVELS + 1) * ndtr(-math.sqrt(math.log(k))) / TAIL_LEVELS
    thresholds = -ndtri(g)
    abs_t = np.sort(np.abs(t))
    counts = N - np.searchsorted(abs_t, thresholds, side="left")
    return float(np.sum((counts / (2.0 * N * g) - 1.0) ** 2))


def select_kappa(
    X: SampleMatrix,
    method: GfcMethod = GfcMethod.LASSO,
    grid=KAPPA_GRID,
    threads: Optional[int] = None,
) -> KappaSelection:
    """
    Pick the penalty multiplier whose statistics best match N(0, 1) in the tail.

    Every kappa on the grid runs the node-wise fits and pair statistics; the
    smallest minimiser of tail_calibration wins. A scaled Lasso that collapses
    at some kappa scores +inf there.

    Args:
        X: n x k samples
        method: GFC_L or GFC_SL
        grid: Candidate multipliers (default b / (20 sqrt 2), b = 1..40)
        threads: Worker count for the node fits

    Returns:
        KappaSelection

    Raises:
        DegenerateScale: If the scaled Lasso collapses at every kappa
    """
    _check_size(X)
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0.0):
        raise ValueError("the kappa grid needs positive values")
    criterion = np.full(grid.size, np.inf)
    last_error: Optional[DegenerateScale] = None
    for m, kappa in enumerate(grid):
        try:
            fit_report = fit_all_nodes(X, method, float(kappa), threads=threads)
        except DegenerateScale as e:
            last_error = e
            continue
        tests = t_statistics(residuals(X, fit_report), fit_report)
        criterion[m] = tail_calibration(tests.t, X.k)
    if not np.any(np.isfinite(criterion)):
        raise last_error
    best = int(np.argmin(criterion))
    logger.debug("Tail calibration picked kappa=%.4f (criterion %.4f)", grid[best], criterion[best])
    return KappaSelection(kappa=float(grid[best]), grid=grid, criterion=criterion)


def _check_size(X: SampleMatrix) -> None:
    if X.n < MIN_N or X.k < MIN_K:
        raise MalformedInput(
            f"GFC needs n >= {MIN_N} observations and k >= {MIN_K} variables, got n={X.n}, k={X.k}"
        )
