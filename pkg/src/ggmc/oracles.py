"""
Closed-form reference quantities used as independent ground truth.

- residual covariances delta_ij = omega_ij / (omega_ii omega_jj), delta_ii = 1 / omega_ii
- Isserlis covariance of the centred products U_ij, with a Monte Carlo counterpart
- Mehler-series covariance of normal indicators and its |rho| / (1 - |rho|) bound
- the two-sided p-value CDF under a mean shift, which is concave
- Demko-type decay of the inverse of a banded covariance
- the b_n bias factor computed from oracle residuals
- the average p-value CDF that the p-value ECDF approaches under weak dependence
"""

import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr, ndtri

from .designs import band_precision, tridiagonal_covariance, validate_c1
from .errors import InvalidRho, NotBanded, NotPositiveDefinite
from .linalg import as_symmetric, cholesky, condition_number, invert_spd
from .models import (
    BandedDecayReport,
    GraphModel,
    MehlerResult,
    MonteCarloEstimate,
    OracleCheck,
    OracleConfig,
    OracleReport,
    SampleMatrix,
)
from .pi0 import ecdf, ks_distance
from .sampler import STREAM_ORACLE, rng_for, sample_mvn, standard_normal

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
MC_MIN_REPS = 10_000
MC_CHUNK_ELEMENTS = 4_000_000
BAND_TOL = 1e-12
ROUNDOFF_RTOL = 1e-10


# ====================
# Residual covariances and Isserlis
# ====================

def delta_matrix(omega: np.ndarray) -> np.ndarray:
    """Covariance of the population node-wise residuals implied by Omega."""
    omega = as_symmetric(omega)
    d = np.diag(omega)
    if np.any(d <= 0.0):
        raise NotPositiveDefinite("precision matrix has a non-positive diagonal entry")
    delta = omega / np.outer(d, d)
    np.fill_diagonal(delta, 1.0 / d)
    return delta


def _delta_of(source: Union[GraphModel, np.ndarray]) -> np.ndarray:
    if isinstance(source, GraphModel):
        return delta_matrix(source.omega)
    return as_symmetric(source)


def _check_pair(pair: Sequence[int]) -> Pair:
    i, j = int(pair[0]), int(pair[1])
    if not i < j:
        raise ValueError(f"pairs must satisfy i < j, got {pair}")
    return i, j


def isserlis_cov(delta: np.ndarray, pair: Sequence[int], other: Sequence[int]) -> float:
    """Cov(U_ij, U_i'j') = delta_ii' delta_jj' + delta_ij' delta_i'j."""
    i, j = _check_pair(pair)
    a, b = _check_pair(other)
    return float(delta[i, a] * delta[j, b] + delta[i, b] * delta[a, j])


def isserlis_matrix(delta: np.ndarray) -> np.ndarray:
    """Isserlis covariance of every pair against every pair (upper-triangle order)."""
    k = delta.shape[0]
    rows, cols = np.triu_indices(k, k=1)
    cross = delta[np.ix_(rows, cols)]
    return delta[np.ix_(rows, rows)] * delta[np.ix_(cols, cols)] + cross * cross.T


def mc_u_cov(
    source: Union[GraphModel, np.ndarray],
    pair: Sequence[int],
    other: Sequence[int],
    n: int = 1,
    reps: int = MC_MIN_REPS,
    seed: int = 0,
) -> MonteCarloEstimate:
    """
    Monte Carlo Cov(U_ij, U_i'j') with eps drawn from N(0, Delta).

    Only the (at most four) involved coordinates are simulated. Draws come
    from the oracle stream of seed in fixed-size chunks.

    Args:
        source: GraphModel (Delta derived from Omega) or Delta itself
        pair, other: Index pairs with i < j
        n: Rows per U statistic
        reps: Replications (>= 10^4)
        seed: Oracle seed
    """
    if reps < MC_MIN_REPS:
        raise ValueError(f"need reps >= {MC_MIN_REPS}, got {reps}")
    if n < 1:
        raise ValueError("n must be positive")
    delta = _delta_of(source)
    i, j = _check_pair(pair)
    a, b = _check_pair(other)
    idx = sorted({i, j, a, b})
    pos = {v: t for t, v in enumerate(idx)}
    sub = delta[np.ix_(idx, idx)]
    lower = cholesky(sub).lower

    rng = rng_for(seed, STREAM_ORACLE)
    first = np.empty(reps)
    second = np.empty(reps)
    chunk = max(1, MC_CHUNK_ELEMENTS // (n * len(idx)))
    root_n = math.sqrt(n)
    done = 0
    while done < reps:
        size = min(chunk, reps - done)
        eps = standard_normal(rng, (size, n, len(idx))) @ lower.T
        first[done:done + size] = (
            eps[..., pos[i]] * eps[..., pos[j]] - sub[pos[i], pos[j]]
        ).sum(axis=1) / root_n
        second[done:done + size] = (
            eps[..., pos[a]] * eps[..., pos[b]] - sub[pos[a], pos[b]]
        ).sum(axis=1) / root_n
        done += size

    products = (first - first.mean()) * (second - second.mean())
    value = float(products.sum() / (reps - 1))
    std_error = float(products.std(ddof=1) / math.sqrt(reps))
    return MonteCarloEstimate(value=value, std_error=std_error, reps=reps, seed=seed)


# ====================
# Mehler series
# ====================

def _check_rho(rho: float) -> None:
    if not -1.0 < rho < 1.0:
        raise InvalidRho(f"rho={rho} must lie in (-1, 1)")


def mehler_bound(rho: float) -> float:
    """|rho| / (1 - |rho|)."""
    _check_rho(rho)
    return abs(rho) / (1.0 - abs(rho))


def mehler_indicator_cov(rho: float, x: float = 0.0, n_terms: int = 50) -> MehlerResult:
    """
    Cov(1{X <= x}, 1{Y <= x}) for standard bivariate normals with correlation rho,
    as the truncated series sum_{m>=1} rho^m / m! (H_{m-1}(x) phi(x))^2.

    Hermite polynomials are carried in normalised form h_m = H_m / sqrt(m!)
    so that the recurrence stays bounded; each term is then
    rho^m / m * h_{m-1}(x)^2 phi(x)^2.

    Raises:
        InvalidRho: If |rho| >= 1
    """
    _check_rho(rho)
    if n_terms < 1:
        raise ValueError("n_terms must be at least 1")
    phi_sq = (INV_SQRT_2PI * math.exp(-0.5 * x * x)) ** 2
    h_prev, h_curr = 0.0, 1.0  # h_{-1}, h_0
    total = 0.0
    power = 1.0
    for m in range(1, n_terms + 1):
        power *= rho
        total += power / m * h_curr * h_curr * phi_sq
        # advance h_{m-1} -> h_m
        h_prev, h_curr = h_curr, (x * h_curr - math.sqrt(m - 1) * h_prev) / math.sqrt(m)
    tail = abs(rho) ** (n_terms + 1) / (1.0 - abs(rho))
    return MehlerResult(value=total, n_terms=n_terms, tail_bound=tail, bound=mehler_bound(rho))


def orthant_cov(rho: float, x: float = 0.0) -> float:
    """
    Reference value of the same covariance by quadrature of the bivariate
    normal density along the correlation path: integral_0^rho phi_2(x, x; r) dr.
    """
    _check_rho(rho)

    def density(r: float) -> float:
        return math.exp(-x * x / (1.0 + r)) / (2.0 * math.pi * math.sqrt(1.0 - r * r))

    value, _ = quad(density, 0.0, rho, epsabs=1e-13, epsrel=1e-12)
    return float(value)


# ====================
# Alternative p-value distribution
# ====================

def _z_of(lam):
    return -ndtri(np.asarray(lam, dtype=float) / 2.0)


def alt_pvalue_cdf(a: float, lam):
    """
    CDF of the two-sided p-value of N(a, 1):
    F_P(lambda) = 1 - Phi(z - a) + Phi(-z - a), z = Phi^{-1}(1 - lambda/2).
    """
    lam_arr = np.asarray(lam, dtype=float)
    z = _z_of(np.clip(lam_arr, 0.0, 1.0))
    out = np.where(
        lam_arr <= 0.0, 0.0, np.where(lam_arr >= 1.0, 1.0, ndtr(a - z) + ndtr(-z - a))
    )
    return float(out) if out.ndim == 0 else out


def alt_pvalue_density(a: float, lam):
    """F_P'(lambda) = [phi(z - a) + phi(z + a)] / (2 phi(z)) on (0, 1)."""
    z = _z_of(lam)
    out = 0.5 * (np.exp(a * z - 0.5 * a * a) + np.exp(-a * z - 0.5 * a * a))
    return float(out) if np.ndim(out) == 0 else out


# ====================
# Banded decay
# ====================

def banded_decay_report(model: GraphModel, m: int) -> BandedDecayReport:
    """
    Decay of Omega = Sigma^{-1} for an m-banded Sigma.

    r = ((sqrt(c) - 1) / (sqrt(c) + 1))^2 from the condition number c of Sigma;
    C is the smallest constant with |omega_ij| <= C r^{|i-j| / (2m)} over all
    entries above round-off (m is the half-bandwidth, sigma_ij = 0 for |i-j| > m).

    Raises:
        NotBanded: If Sigma has non-zero entries beyond band m
    """
    if m < 0:
        raise ValueError("band width m must be non-negative")
    sigma = as_symmetric(model.sigma)
    k = sigma.shape[0]
    dist = np.abs(np.subtract.outer(np.arange(k), np.arange(k)))
    scale = max(float(np.max(np.abs(sigma))), 1.0)
    if np.any(np.abs(sigma[dist > m]) > BAND_TOL * scale):
        raise NotBanded(f"covariance has non-zero entries beyond band {m}")

    omega = invert_spd(sigma)
    abs_omega = np.abs(omega)
    cond = condition_number(sigma)
    r = ((math.sqrt(cond) - 1.0) / (math.sqrt(cond) + 1.0)) ** 2

    floor = ROUNDOFF_RTOL * float(np.max(abs_omega))
    if m == 0 or r == 0.0:
        off = abs_omega[dist > 0]
        C = float(np.max(np.diag(abs_omega)))
        if off.size and np.max(off) > floor:
            C = math.inf
    else:
        keep = abs_omega > floor
        log_ratio = np.log(abs_omega[keep]) - dist[keep] / (2.0 * m) * math.log(r)
        C = float(math.exp(np.max(log_ratio)))

    total = float(abs_omega.sum())
    return BandedDecayReport(
        k=k,
        m=m,
        sum_abs_omega=total,
        sum_abs_omega_per_k=total / k,
        condition_number=cond,
        r=r,
        demko_C_fit=C,
    )


# ====================
# Oracle residuals and the b_n factor
# ====================

def oracle_residuals(model: GraphModel, X: Union[SampleMatrix, np.ndarray]) -> np.ndarray:
    """Population residuals eps = X Omega D^{-1}, D = diag(Omega)."""
    values = X.values if isinstance(X, SampleMatrix) else np.asarray(X, dtype=float)
    return values @ model.omega / np.diag(model.omega)


def b_correction(model: GraphModel, eps_true: np.ndarray) -> np.ndarray:
    """
    b_ij = omega_ii s_ii + omega_jj s_jj - 1 with s the centred 1/n covariance
    of the oracle residuals; tends to 1 as n grows.
    """
    eps = np.asarray(eps_true, dtype=float)
    centred = eps - eps.mean(axis=0)
    s_diag = np.mean(centred**2, axis=0)
    scaled = np.diag(model.omega) * s_diag
    return scaled[:, None] + scaled[None, :] - 1.0


# ====================
# Average p-value CDF
# ====================

def pair_shifts(model: GraphModel, n: int) -> np.ndarray:
    """Mean shift sqrt(n) delta_ij / sqrt(delta_ii delta_jj) of every pair (upper triangle)."""
    delta = delta_matrix(model.omega)
    d = np.sqrt(np.diag(delta))
    rows, cols = np.triu_indices(model.k, k=1)
    return math.sqrt(n) * delta[rows, cols] / (d[rows] * d[cols])


def average_pvalue_cdf(model: GraphModel, n: int, lam):
    """
    (1/N) sum over pairs of alt_pvalue_cdf(a_ij, lambda); null pairs contribute lambda.
    """
    shifts, counts = np.unique(np.round(np.abs(pair_shifts(model, n)), 12), return_counts=True)
    lam_arr = np.asarray(lam, dtype=float)
    total = np.zeros_like(lam_arr)
    for a, c in zip(shifts, counts):
        total = total + c * np.asarray(alt_pvalue_cdf(float(a), lam_arr))
    out = total / counts.sum()
    return float(out) if out.ndim == 0 else out


def average_cdf_distance(p, model: GraphModel, n: int) -> float:
    """Sup distance between the p-value ECDF and the model's average p-value CDF."""
    return ks_distance(ecdf(p), lambda x: average_pvalue_cdf(model, n, x))


# ====================
# Oracle suite
# ====================

def _random_precision(rng: np.random.Generator, k: int) -> np.ndarray:
    A = standard_normal(rng, (k, k))
    omega = A @ A.T / k + 0.5 * np.eye(k)
    return 0.5 * (omega + omega.T)


def _check_mehler(config: OracleConfig) -> List[OracleCheck]:
    rho = 0.5 if config.mehler_rho is None else config.mehler_rho
    x = config.mehler_x
    series = mehler_indicator_cov(rho, x, config.mehler_terms)
    expected = orthant_cov(rho, x)
    longer = mehler_indicator_cov(rho, x, config.mehler_terms + 10)

    worst = 0.0
    for r in np.linspace(-0.95, 0.95, 20):
        for xx in np.linspace(-3.0, 3.0, 20):
            res = mehler_indicator_cov(float(r), float(xx), config.mehler_terms)
            if res.bound > 0:
                worst = max(worst, abs(res.value) / res.bound)

    return [
        OracleCheck(
            name="mehler_series",
            passed=abs(series.value - expected) <= max(1e-6, 2.0 * series.tail_bound),
            value=series.value,
            expected=expected,
            margin=abs(series.value - expected),
            detail=f"rho={rho}, x={x}, {series.n_terms} terms",
        ),
        OracleCheck(
            name="mehler_tail_bound",
            passed=abs(longer.value - series.value) <= series.tail_bound,
            value=abs(longer.value - series.value),
            expected=series.tail_bound,
        ),
        OracleCheck(
            name="mehler_bound_grid",
            passed=worst <= 1.0,
            value=worst,
            expected=1.0,
            margin=1.0 - worst,
            detail="max |cov| / (|rho| / (1 - |rho|)) over a 20 x 20 (rho, x) grid",
        ),
    ]


def _check_isserlis(config: OracleConfig) -> Tuple[List[OracleCheck], Dict[str, Any]]:
    checks: List[OracleCheck] = []
    rng = rng_for(config.seed, STREAM_ORACLE)
    worst_se = 0.0
    worst_corr = 0.0
    for t in range(config.isserlis_models):
        delta = delta_matrix(_random_precision(rng, 5))
        pairs = [(i, j) for i in range(5) for j in range(i + 1, 5)]
        picks = rng.choice(len(pairs), size=2, replace=False)
        pair, other = pairs[picks[0]], pairs[picks[1]]
        exact = isserlis_cov(delta, pair, other)
        mc = mc_u_cov(delta, pair, other, reps=config.mc_reps, seed=config.seed + t + 1)
        worst_se = max(worst_se, abs(mc.value - exact) / mc.std_error)
        cov = isserlis_matrix(delta)
        sd = np.sqrt(np.diag(cov))
        corr = cov / np.outer(sd, sd)
        np.fill_diagonal(corr, 0.0)
        worst_corr = max(worst_corr, float(np.max(np.abs(corr))))

    checks.append(
        OracleCheck(
            name="isserlis_vs_monte_carlo",
            passed=worst_se <= 4.0,
            value=worst_se,
            expected=0.0,
            margin=4.0 - worst_se,
            detail=f"largest |MC - exact| in standard errors over {config.isserlis_models} models",
        )
    )
    checks.append(
        OracleCheck(
            name="isserlis_correlation_below_one",
            passed=worst_corr < 1.0,
            value=worst_corr,
            expected=1.0,
        )
    )

    k = config.isserlis_identity_k or 4
    identity = isserlis_matrix(delta_matrix(np.eye(k)))
    checks.append(
        OracleCheck(
            name="isserlis_identity",
            passed=bool(np.array_equal(identity, np.eye(identity.shape[0]))),
            detail=f"Omega = I_{k}: ones on the diagonal, zeros elsewhere",
        )
    )
    extras = {"isserlis_identity": identity.tolist()} if config.isserlis_identity_k else {}
    return checks, extras


def _check_concavity() -> List[OracleCheck]:
    grid = np.arange(1, 1000) * 1e-3
    worst_second = -math.inf
    monotone = True
    for a in (0.5, 1.0, 2.0, 4.0):
        values = alt_pvalue_cdf(a, grid)
        worst_second = max(worst_second, float(np.max(np.diff(values, 2))))
        monotone = monotone and bool(np.all(np.diff(alt_pvalue_density(a, grid)) <= 1e-12))
    example = alt_pvalue_cdf(2.0, 0.05)
    return [
        OracleCheck(
            name="alt_pvalue_cdf_concave",
            passed=worst_second <= 1e-9 and monotone,
            value=worst_second,
            expected=0.0,
            margin=1e-9 - worst_second,
            detail="largest second difference on a 1e-3 lambda grid, a in {0.5, 1, 2, 4}",
        ),
        OracleCheck(
            name="alt_pvalue_cdf_example",
            passed=abs(example - 0.5160) <= 1e-4,
            value=example,
            expected=0.5160,
            margin=abs(example - 0.5160),
            detail="a = 2, lambda = 0.05",
        ),
    ]


def _check_banded_decay() -> Tuple[OracleCheck, Dict[str, Any]]:
    ratios = []
    demko_ok = True
    for k in (50, 100, 200, 400):
        model = tridiagonal_covariance(k)
        report = banded_decay_report(model, 1)
        ratios.append(report.sum_abs_omega_per_k)
        dist = np.abs(np.subtract.outer(np.arange(k), np.arange(k)))
        envelope = report.demko_C_fit * report.r ** (dist / 2.0)
        slack = ROUNDOFF_RTOL * float(np.max(np.abs(model.omega)))
        demko_ok = demko_ok and bool(np.all(np.abs(model.omega) <= envelope * (1 + 1e-9) + slack))
    variation = (max(ratios) - min(ratios)) / min(ratios)
    check = OracleCheck(
        name="banded_decay",
        passed=variation < 0.10 and demko_ok,
        value=variation,
        expected=0.0,
        margin=0.10 - variation,
        detail="relative spread of sum|omega_ij| / k over k in {50, 100, 200, 400}",
    )
    return check, {"banded_sum_abs_omega_per_k": ratios}


def _check_b_correction(config: OracleConfig) -> OracleCheck:
    model = band_precision(10)
    X = sample_mvn(model, 100_000, config.seed)
    b = b_correction(model, oracle_residuals(model, X))
    worst = float(np.max(np.abs(b - 1.0)))
    return OracleCheck(
        name="b_correction",
        passed=worst <= 0.05,
        value=worst,
        expected=0.0,
        margin=0.05 - worst,
        detail="band graph, k = 10, n = 100000",
    )


def _check_c1(config: OracleConfig) -> OracleCheck:
    report = validate_c1(band_precision(100), n=200, c0=config.c0)
    return OracleCheck(
        name="c1_band_example",
        passed=report.bounded and not report.flagged,
        value=max(report.max_sigma_diag, report.max_omega_diag),
        expected=config.c0,
        margin=config.c0 - max(report.max_sigma_diag, report.max_omega_diag),
        detail=f"band graph k = 100, n = 200, log(k)/n = {report.log_k_over_n:.4f}",
    )


def run_oracle_suite(config: Optional[OracleConfig] = None) -> OracleReport:
    """
    Run every closed-form check and return the pass/fail report.

    Args:
        config: Suite settings (seed, Mehler point, Monte Carlo size, c0)

    Returns:
        OracleReport: One OracleCheck per property, plus numeric extras
    """
    config = config or OracleConfig()
    checks: List[OracleCheck] = []
    extras: Dict[str, Any] = {
        "pair_shift": "a_ij = sqrt(n) delta_ij / sqrt(delta_ii delta_jj)",
    }

    checks.extend(_check_mehler(config))
    isserlis_checks, isserlis_extras = _check_isserlis(config)
    checks.extend(isserlis_checks)
    extras.update(isserlis_extras)
    checks.extend(_check_concavity())
    decay_check, decay_extras = _check_banded_decay()
    checks.append(decay_check)
    extras.update(decay_extras)
    checks.append(_check_b_correction(config))
    checks.append(_check_c1(config))

    rho = 0.5 if config.mehler_rho is None else config.mehler_rho
    extras["mehler"] = mehler_indicator_cov(rho, config.mehler_x, config.mehler_terms).model_dump()

    for check in checks:
        if not check.passed:
            logger.warning("Oracle check %s failed (value=%s)", check.name, check.value)
    return OracleReport(checks=checks, extras=extras)
