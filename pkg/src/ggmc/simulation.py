"""
Monte Carlo harness for the simulation studies.

A run builds the graph model once, then executes `replications` independent
end-to-end pipelines (sample, GFC, pi0 selectors, FDP) where replication r
uses seed root + r. Replications run in worker processes; records are merged
by index so the report does not depend on scheduling.
"""

import logging
import statistics
import time
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from .config import thread_count
from .designs import build_model, validate_c1
from .errors import GgmcError, SimulationBudgetExceeded
from .gfc import fdp_and_power, null_statistics, run_gfc, select_kappa
from .models import (
    GraphModel,
    Pi0Method,
    RunConfig,
    SimulationAggregate,
    SimulationRecord,
    SimulationReport,
)
from .pi0 import estimate_pi0, lambda_grid
from .sampler import sample_mvn

logger = logging.getLogger(__name__)

FAILURE_BUDGET = 0.10
NULL_MEAN_LIMIT = 0.2
NULL_SD_LIMIT = 1.2


def run_replication(
    config: RunConfig,
    index: int,
    model: Optional[GraphModel] = None,
    threads: int = 1,
) -> SimulationRecord:
    """
    One end-to-end replication.

    Args:
        config: Simulation config (model, n, method, kappa, alpha, pi0 settings)
        index: Replication number r >= 1; the replication seed is config.seed + r
        model: Pre-built graph model (built from config.model if omitted)
        threads: Workers for the node fits and bootstrap inside this replication

    Returns:
        SimulationRecord
    """
    if config.model is None:
        raise ValueError("simulation needs a model specification")
    model = model or build_model(config.model)
    seed = config.seed + index
    started = time.perf_counter()

    X = sample_mvn(model, config.n, seed)
    kappa = config.kappa
    if config.tune_kappa:
        kappa = select_kappa(X, config.method, threads=threads).kappa
    run = run_gfc(X, config.method, kappa, config.alpha, threads=threads)
    grid = lambda_grid(config.grid_lo, config.grid_hi, config.grid_step)
    estimates = estimate_pi0(
        run.tests.p,
        config.pi0_method,
        grid,
        B=config.B,
        seed=seed,
        spline_dof=config.spline_dof,
        threads=threads,
    )
    fdp, power = fdp_and_power(run.fdr, model)
    null_mean, null_sd = null_statistics(run.tests, model)

    smoother = estimates.get(Pi0Method.SMOOTHER)
    bootstrap = estimates.get(Pi0Method.BOOTSTRAP)
    return SimulationRecord(
        replication=index,
        seed=seed,
        pi0_smoother=smoother.pi0_hat if smoother else None,
        pi0_bootstrap=bootstrap.pi0_hat if bootstrap else None,
        pi0_true=model.pi0_true,
        pi0_nominal=model.pi0_nominal,
        fdp=fdp,
        power=power,
        n_rejected=run.fdr.n_rejected,
        t_hat=run.fdr.t_hat,
        not_converged=len(run.fit_report.not_converged),
        kappa=kappa,
        null_t_mean=null_mean,
        null_t_sd=null_sd,
        runtime_seconds=time.perf_counter() - started,
    )


def _replicate(config: RunConfig, index: int, model: GraphModel) -> Union[SimulationRecord, Dict[str, Any]]:
    try:
        return run_replication(config, index, model, threads=1)
    except GgmcError as e:
        return {
            "replication": index,
            "seed": config.seed + index,
            "error": type(e).__name__,
            "message": e.message,
        }


def _mean_sd(values: List[Optional[float]]) -> Tuple[Optional[float], Optional[float]]:
    present = [v for v in values if v is not None]
    if not present:
        return None, None
    mean = float(np.mean(present))
    sd = statistics.stdev(present) if len(present) > 1 else 0.0
    return mean, float(sd)


def aggregate(records: List[SimulationRecord]) -> SimulationAggregate:
    mean_s, sd_s = _mean_sd([r.pi0_smoother for r in records])
    mean_b, sd_b = _mean_sd([r.pi0_bootstrap for r in records])
    mean_f, sd_f = _mean_sd([r.fdp for r in records])
    mean_p, _ = _mean_sd([r.power for r in records])
    mean_t, _ = _mean_sd([r.null_t_mean for r in records])
    sd_t, _ = _mean_sd([r.null_t_sd for r in records])
    return SimulationAggregate(
        mean_pi0_smoother=mean_s,
        sd_pi0_smoother=sd_s,
        mean_pi0_bootstrap=mean_b,
        sd_pi0_bootstrap=sd_b,
        mean_fdp=mean_f if mean_f is not None else 0.0,
        sd_fdp=sd_f if sd_f is not None else 0.0,
        mean_power=mean_p if mean_p is not None else 0.0,
        mean_null_t=mean_t,
        sd_null_t=sd_t,
    )


def simulate(config: RunConfig, threads: Optional[int] = None) -> SimulationReport:
    """
    Run config.replications replications on seeds config.seed + 1 .. + R.

    Failed replications (any GgmcError) are logged and excluded; the run
    fails if more than 10% of them fail. The aggregate carries the mean and
    spread of T over the non-edges, which is N(0, 1) when the statistics are
    calibrated.

    Raises:
        SimulationBudgetExceeded: If the failure budget is exceeded
    """
    if config.model is None:
        raise ValueError("simulation needs a model specification")
    model = build_model(config.model)
    validate_c1(model, n=config.n, c0=config.oracle.c0)
    logger.info("Simulating %s: %s", model.describe(), config.method.value)

    workers = min(threads or thread_count(), config.replications)
    indices = range(1, config.replications + 1)
    if workers <= 1:
        outcomes = [_replicate(config, i, model) for i in indices]
    else:
        outcomes = Parallel(n_jobs=workers)(delayed(_replicate)(config, i, model) for i in indices)

    records = [o for o in outcomes if isinstance(o, SimulationRecord)]
    failed = [o for o in outcomes if isinstance(o, dict)]
    for f in failed:
        logger.warning("Replication %d (seed %d) failed: %s", f["replication"], f["seed"], f["message"])
    if len(failed) > FAILURE_BUDGET * config.replications or not records:
        raise SimulationBudgetExceeded(
            f"{len(failed)} of {config.replications} replications failed "
            f"(budget {FAILURE_BUDGET:.0%})",
            failed=len(failed),
            total=config.replications,
        )

    agg = aggregate(records)
    off_null = agg.mean_null_t is not None and (
        abs(agg.mean_null_t) > NULL_MEAN_LIMIT or agg.sd_null_t > NULL_SD_LIMIT
    )
    if off_null:
        logger.warning(
            "Null-pair statistics are off N(0, 1): mean %.3f, sd %.3f; pi0 estimates may sit "
            "below the counted pi0",
            agg.mean_null_t,
            agg.sd_null_t,
        )

    return SimulationReport(
        config=config,
        model=model.describe(),
        records=records,
        failed=failed,
        failure_budget=FAILURE_BUDGET,
        aggregate=agg,
    )
