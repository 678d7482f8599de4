"""
Node-wise sparse regression: Lasso (GFC_L) and scaled Lasso (GFC_SL).

The Lasso objective is (1/(2n)) ||y - D beta||^2 + lambda ||beta||_1, solved by
cyclic coordinate descent in ascending coordinate order on the Gram matrix
D^T D / n. Full sweeps alternate with sweeps over the active set; convergence
is only declared after a full sweep whose largest coefficient change is
below tol.
"""

import logging
import math
from typing import List, Optional

import numpy as np
from joblib import Parallel, delayed

from .config import thread_count
from .errors import DegenerateScale, DidNotConverge
from .models import FitReport, GfcMethod, LassoResult, NodewiseFit, SampleMatrix
from .sampler import center

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 10_000
SCALE_FLOOR = 1e-12


def _shrink(z: float, lam: float) -> float:
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


def lasso_objective(design: np.ndarray, y: np.ndarray, beta: np.ndarray, lam: float) -> float:
    n = design.shape[0]
    r = y - design @ beta
    return float(r @ r / (2.0 * n) + lam * np.sum(np.abs(beta)))


def _sweep(beta, grad, gram, diag, coords, lam) -> float:
    """One coordinate-descent pass over coords; returns the largest change."""
    max_delta = 0.0
    for j in coords:
        d = diag[j]
        old = beta[j]
        new = _shrink(grad[j] + d * old, lam) / d
        if new != old:
            delta = new - old
            grad -= gram[j] * delta
            beta[j] = new
            if abs(delta) > max_delta:
                max_delta = abs(delta)
    return max_delta


def lasso(
    design: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    beta0: Optional[np.ndarray] = None,
    gram: Optional[np.ndarray] = None,
    xty: Optional[np.ndarray] = None,
    check_objective: bool = False,
) -> LassoResult:
    """
    Lasso by cyclic coordinate descent with exact soft-threshold updates.

    Args:
        design: n x p centered design matrix
        y: Centered response
        lam: Penalty level (>= 0)
        tol: Stop when the largest coefficient change of a full sweep is below tol
        max_iter: Maximum number of sweeps
        beta0: Warm start
        gram: Precomputed D^T D / n
        xty: Precomputed D^T y / n
        check_objective: Assert that the objective does not increase across sweeps

    Returns:
        LassoResult

    Raises:
        DidNotConverge: After max_iter sweeps; the exception carries the partial fit
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    n, p = design.shape
    G = gram if gram is not None else design.T @ design / n
    c = xty if xty is not None else design.T @ y / n
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    grad = c - G @ beta
    diag = np.diag(G)
    # zero-variance columns never enter the model
    usable = [j for j in range(p) if diag[j] > 0.0]
    for j in range(p):
        if diag[j] <= 0.0:
            beta[j] = 0.0

    previous = lasso_objective(design, y, beta, lam) if check_objective else None
    iterations = 0
    converged = False
    while iterations < max_iter:
        max_delta = _sweep(beta, grad, G, diag, usable, lam)
        iterations += 1
        if check_objective:
            current = lasso_objective(design, y, beta, lam)
            assert current <= previous + 1e-12 * max(1.0, abs(previous)), (
                f"objective increased from {previous} to {current}"
            )
            previous = current
        if max_delta < tol:
            converged = True
            break
        active = [j for j in usable if beta[j] != 0.0]
        while iterations < max_iter and active:
            inner_delta = _sweep(beta, grad, G, diag, active, lam)
            iterations += 1
            if inner_delta < tol:
                break

    result = LassoResult(beta=beta, lambda_used=lam, iterations=iterations, converged=converged)
    if not converged:
        raise DidNotConverge(f"Lasso did not converge in {max_iter} sweeps", fit=result)
    return result


def kkt_check(design: np.ndarray, y: np.ndarray, lam: float, beta: np.ndarray) -> float:
    """
    Largest violation of the Lasso optimality conditions at beta.

    Active coordinates must satisfy D_j^T (y - D beta)/n = lambda sign(beta_j);
    inactive ones |D_j^T (y - D beta)/n| <= lambda.
    """
    n = design.shape[0]
    g = design.T @ (y - design @ beta) / n
    active = beta != 0
    worst = 0.0
    if np.any(active):
        worst = float(np.max(np.abs(g[active] - lam * np.sign(beta[active]))))
    if np.any(~active):
        worst = max(worst, float(np.max(np.maximum(np.abs(g[~active]) - lam, 0.0))))
    return worst


def scaled_lasso(
    design: np.ndarray,
    y: np.ndarray,
    lambda0: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    gram: Optional[np.ndarray] = None,
    xty: Optional[np.ndarray] = None,
) -> LassoResult:
    """
    Scaled Lasso: alternate beta = lasso(D, y, sigma * lambda0) and
    sigma = ||y - D beta|| / sqrt(n) until sigma changes by less than tol relative.

    The iteration runs on y / sd(y) and is mapped back, so scaling y by c > 0
    scales beta and sigma by c and leaves the support unchanged.

    Raises:
        DidNotConverge: If the outer iteration does not settle in max_iter rounds
        DegenerateScale: If sigma falls below 1e-12 sd(y)
    """
    n, p = design.shape
    y = np.asarray(y, dtype=float)
    sd_y = float(np.sqrt(np.mean((y - y.mean()) ** 2)))
    if sd_y <= 0.0:
        raise DegenerateScale("response has zero variance; the noise scale is undefined")
    ys = y / sd_y
    G = gram if gram is not None else design.T @ design / n
    c = (xty if xty is not None else design.T @ y / n) / sd_y

    sigma = 1.0
    beta = np.zeros(p)
    sweeps = 0
    converged = False
    for _ in range(max_iter):
        try:
            fit = lasso(design, ys, sigma * lambda0, tol, max_iter, beta0=beta, gram=G, xty=c)
        except DidNotConverge as e:
            partial = LassoResult(
                beta=e.fit.beta * sd_y,
                lambda_used=sigma * lambda0 * sd_y,
                iterations=sweeps + e.fit.iterations,
                converged=False,
                sigma_hat=sigma * sd_y,
            )
            raise DidNotConverge(e.message, fit=partial) from e
        beta = fit.beta
        sweeps += fit.iterations
        resid = ys - design @ beta
        sigma_new = float(np.linalg.norm(resid) / math.sqrt(n))
        if sigma_new < SCALE_FLOOR:
            raise DegenerateScale(f"scaled Lasso noise estimate collapsed to {sigma_new * sd_y:.3e}")
        if abs(sigma_new - sigma) < tol * sigma:
            sigma = sigma_new
            converged = True
            break
        sigma = sigma_new

    result = LassoResult(
        beta=beta * sd_y,
        lambda_used=sigma * lambda0 * sd_y,
        iterations=sweeps,
        converged=converged,
        sigma_hat=sigma * sd_y,
    )
    if not converged:
        raise DidNotConverge("scaled Lasso noise iteration did not settle", fit=result)
    return result


def universal_level(k: int, n: int) -> float:
    """sqrt(2 log(k) / n)."""
    return math.sqrt(2.0 * math.log(k) / n)


def _fit_node(
    i: int,
    Xc: np.ndarray,
    G_full: np.ndarray,
    method: GfcMethod,
    kappa: float,
    tol: float,
    max_iter: int,
) -> NodewiseFit:
    n, k = Xc.shape
    others = np.delete(np.arange(k), i)
    design = Xc[:, others]
    y = Xc[:, i]
    gram = G_full[np.ix_(others, others)]
    xty = G_full[others, i]
    level = kappa * universal_level(k, n)
    sd_i = math.sqrt(G_full[i, i])

    if sd_i == 0.0:
        # constant response: nothing to explain, the residual check reports it
        return NodewiseFit(
            node=i,
            beta=np.zeros(k - 1),
            lambda_used=0.0,
            method=method,
            sigma_hat=0.0 if method == GfcMethod.SCALED_LASSO else None,
            iterations=0,
            converged=True,
        )

    try:
        if method == GfcMethod.LASSO:
            fit = lasso(design, y, level * sd_i, tol, max_iter, gram=gram, xty=xty)
        else:
            fit = scaled_lasso(design, y, level, tol, max_iter, gram=gram, xty=xty)
    except DidNotConverge as e:
        logger.warning("Node %d: %s; keeping the partial fit", i, e.message)
        fit = e.fit

    return NodewiseFit(
        node=i,
        beta=fit.beta,
        lambda_used=fit.lambda_used,
        method=method,
        sigma_hat=fit.sigma_hat,
        iterations=fit.iterations,
        converged=fit.converged,
    )


def fit_all_nodes(
    X: SampleMatrix,
    method: GfcMethod = GfcMethod.LASSO,
    kappa: float = 1.0,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    threads: Optional[int] = None,
) -> FitReport:
    """
    Regress every centered column on the remaining centered columns.

    Penalties: Lasso uses lambda_i = kappa * sd(X_i) * sqrt(2 log(k)/n); the
    scaled Lasso uses lambda0 = kappa * sqrt(2 log(k)/n). sd uses the 1/n
    convention. Fits are independent and may run in parallel; the result
    does not depend on scheduling.

    Args:
        X: n x k sample matrix (k >= 3)
        method: GFC_L or GFC_SL
        kappa: Penalty multiplier
        tol: Coordinate-descent tolerance
        max_iter: Sweep cap per fit
        threads: Worker count (default from GGMC_THREADS)

    Returns:
        FitReport: Fits in node order plus the non-converged nodes
    """
    if X.k < 3:
        raise ValueError(f"node-wise regression needs k >= 3 variables, got {X.k}")
    Xc, _ = center(X)
    values = Xc.values
    G_full = values.T @ values / X.n
    workers = threads or thread_count()

    if workers <= 1:
        fits: List[NodewiseFit] = [
            _fit_node(i, values, G_full, method, kappa, tol, max_iter) for i in range(X.k)
        ]
    else:
        # coordinate descent is pure Python: worker processes, not threads
        fits = Parallel(n_jobs=min(workers, X.k))(
            delayed(_fit_node)(i, values, G_full, method, kappa, tol, max_iter) for i in range(X.k)
        )

    not_converged = tuple(f.node for f in fits if not f.converged)
    if not_converged:
        logger.warning("%d of %d node fits did not converge", len(not_converged), X.k)
    return FitReport(fits=tuple(fits), not_converged=not_converged, method=method, kappa=kappa)


def coef_matrix(fits) -> np.ndarray:
    """k x k matrix B with B[i, j] = coefficient of X_j in the fit of X_i, zero diagonal."""
    k = len(fits)
    B = np.zeros((k, k))
    for fit in fits:
        i = fit.node
        B[i, :i] = fit.beta[:i]
        B[i, i + 1:] = fit.beta[i:]
    return B
