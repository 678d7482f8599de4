"""
Command-line interface: ``ggmc estimate | simulate | ecdf | oracle | serve``.

Each command builds a RunConfig from an optional JSON config file overlaid
with the flags given on the command line, validates it before any
computation, writes its artifacts to the output directory and prints a short
JSON summary on stdout. Diagnostics go to stderr.

Exit codes: 0 success, 1 failure (including a failed oracle check),
2 malformed input or invalid configuration, 3 degenerate residuals.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from .config import configure_logging, load_environment, output_dir
from .designs import block_size_for_pi0, build_model
from .errors import EXIT_FAILURE, EXIT_OK, MalformedInput, describe_error, exit_code_for
from .gfc import run_gfc, select_kappa
from .models import Command, DesignTag, EmitFormat, RunConfig
from .oracles import run_oracle_suite
from .pi0 import ecdf, estimate_pi0, lambda_grid
from .sampler import read_pvalues_csv, read_samples_csv, sample_mvn
from .simulation import simulate
from .utils import (
    write_ecdf_csv,
    write_fdr_json,
    write_json,
    write_manifest,
    write_pi0_curve_csv,
    write_pi0_json,
    write_pvalues_csv,
    write_records_csv,
)

logger = logging.getLogger(__name__)


# ====================
# Argument parsing
# ====================

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file mirroring RunConfig; flags override it")
    p.add_argument("--out", dest="output_dir", help="Output directory (default $GGMC_OUTPUT_DIR or ggmc-out)")
    p.add_argument("--emit", help="Comma-separated output formats: json,csv")
    p.add_argument("--threads", type=int, help="Worker cap (0 = all cores); overrides GGMC_THREADS")
    p.add_argument("-v", "--verbose", action="store_true", help="Debug logging on stderr")


def _add_gfc(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", help="lasso (GFC_L) or scaled-lasso (GFC_SL)")
    p.add_argument("--kappa", type=float, help="Penalty multiplier (default 1)")
    p.add_argument("--tune-kappa", dest="tune_kappa", action="store_true", default=None,
                   help="Pick kappa by matching the tail of |T| to N(0, 1)")
    p.add_argument("--alpha", type=float, help="FDR level (default 0.1)")


def _add_pi0(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pi0", dest="pi0_method", choices=["smoother", "bootstrap", "both"])
    p.add_argument("--grid-lo", type=float)
    p.add_argument("--grid-hi", type=float)
    p.add_argument("--grid-step", type=float)
    p.add_argument("--B", "--bootstrap", dest="B", type=int, help="Bootstrap resamples (>= 10)")
    p.add_argument("--spline-dof", type=float, help="Smoothing-spline degrees of freedom (default 3)")
    p.add_argument("--seed", type=int, help="Root seed")


def _add_model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--design", choices=[t.value for t in DesignTag])
    p.add_argument("--k", type=int, help="Number of variables")
    p.add_argument("--s", type=int, help="Block size (block designs)")
    p.add_argument("--rho", type=float, help="Within-block correlation")
    p.add_argument("--q", type=float, help="Edge probability (Erdos-Renyi)")
    p.add_argument(
        "--nominal-pi0",
        type=float,
        help="Pick s (block designs) or q (Erdos-Renyi) from a nominal pi0",
    )
    p.add_argument("--graph-seed", type=int, help="Erdos-Renyi graph seed")
    p.add_argument("--n", type=int, help="Observations per replication")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ggmc",
        description="Estimate the edge proportion of a Gaussian graphical model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="GFC tests and pi0 on a CSV data file")
    est.add_argument("--input", dest="input_path", help="CSV file, one observation per row")
    est.add_argument("--header", action="store_true", default=None)
    _add_gfc(est)
    _add_pi0(est)
    _add_common(est)

    sim = sub.add_parser("simulate", help="Reproduce a simulation-study row")
    sim.add_argument("--reps", dest="replications", type=int, help="Replications")
    _add_model(sim)
    _add_gfc(sim)
    _add_pi0(sim)
    _add_common(sim)

    ec = sub.add_parser("ecdf", help="Plot-ready ECDF of p-values")
    ec.add_argument("--input", dest="input_path", help="CSV of samples, or of p-values with --pvalues")
    ec.add_argument("--pvalues", dest="pvalues_input", action="store_true", default=None)
    ec.add_argument("--header", action="store_true", default=None)
    ec.add_argument("--uniform", dest="uniform_reference", action="store_true", default=None)
    ec.add_argument("--jumps", dest="jump_points", action="store_true", default=None)
    _add_model(ec)
    _add_gfc(ec)
    ec.add_argument("--seed", type=int, help="Sample seed for the inline pipeline")
    _add_common(ec)

    orc = sub.add_parser("oracle", help="Closed-form oracle checks")
    orc.add_argument("--seed", type=int, dest="oracle_seed")
    orc.add_argument("--mehler-rho", type=float)
    orc.add_argument("--x", dest="mehler_x", type=float)
    orc.add_argument("--mehler-terms", type=int)
    orc.add_argument("--isserlis", dest="isserlis_identity_k", type=int, metavar="K",
                     help="Report the Isserlis covariances of Omega = I_K")
    orc.add_argument("--mc-reps", type=int)
    orc.add_argument("--c0", type=float)
    _add_common(orc)

    srv = sub.add_parser("serve", help="Run the MCP server on stdio")
    srv.add_argument("-v", "--verbose", action="store_true")
    return parser


_RUN_FIELDS = (
    "input_path", "header", "pvalues_input", "n", "replications", "seed", "kappa", "tune_kappa",
    "alpha", "pi0_method", "grid_lo", "grid_hi", "grid_step", "B", "spline_dof", "output_dir",
    "uniform_reference", "jump_points",
)
_ORACLE_FIELDS = {
    "oracle_seed": "seed",
    "mehler_rho": "mehler_rho",
    "mehler_x": "mehler_x",
    "mehler_terms": "mehler_terms",
    "isserlis_identity_k": "isserlis_identity_k",
    "mc_reps": "mc_reps",
    "c0": "c0",
}


def _model_overrides(args: argparse.Namespace, base: Optional[Dict[str, Any]]) -> Optional[Dict[str, Any]]:
    model = dict(base or {})
    for flag, field in (("design", "design_tag"), ("k", "k"), ("s", "s"), ("rho", "rho"),
                        ("q", "q"), ("graph_seed", "seed")):
        value = getattr(args, flag, None)
        if value is not None:
            model[field] = value
    nominal = getattr(args, "nominal_pi0", None)
    if nominal is not None and model.get("design_tag") and model.get("k"):
        tag = DesignTag(model["design_tag"])
        if tag in (DesignTag.BLOCK_AR1, DesignTag.BLOCK_EQUICORR):
            model["s"] = block_size_for_pi0(int(model["k"]), nominal)
        elif tag == DesignTag.ERDOS_RENYI:
            model["q"] = round(1.0 - nominal, 12)
    return model or None


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """
    Merge the config file (if any) with explicit flags and validate.

    Raises:
        pydantic.ValidationError: On any out-of-range value
    """
    data: Dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise MalformedInput(f"cannot read config file {args.config}: {e}") from e
    data["command"] = args.command

    for field in _RUN_FIELDS:
        value = getattr(args, field, None)
        if value is not None:
            data[field] = value
    if "output_dir" not in data:
        data["output_dir"] = output_dir()
    if getattr(args, "method", None):
        data["method"] = args.method
    if getattr(args, "emit", None):
        data["emit"] = [part.strip() for part in args.emit.split(",") if part.strip()]

    if hasattr(args, "design"):
        model = _model_overrides(args, data.get("model"))
        if model is not None:
            data["model"] = model

    oracle = dict(data.get("oracle") or {})
    for flag, field in _ORACLE_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            oracle[field] = value
    if oracle:
        data["oracle"] = oracle

    return RunConfig.model_validate(data)


# ====================
# Commands
# ====================

def _emit_json(config: RunConfig) -> bool:
    return EmitFormat.JSON in config.emit


def _emit_csv(config: RunConfig) -> bool:
    return EmitFormat.CSV in config.emit


def _kappa_for(X, config: RunConfig) -> float:
    if config.tune_kappa:
        return select_kappa(X, config.method).kappa
    return config.kappa


def cmd_estimate(config: RunConfig) -> Dict[str, Any]:
    """GFC tests, FDR edges, pi0 selectors and ECDF for one data file."""
    out = Path(config.output_dir)
    X = read_samples_csv(config.input_path, header=config.header)
    run = run_gfc(X, config.method, _kappa_for(X, config), config.alpha)
    grid = lambda_grid(config.grid_lo, config.grid_hi, config.grid_step)
    estimates = estimate_pi0(
        run.tests.p, config.pi0_method, grid, B=config.B, seed=config.seed, spline_dof=config.spline_dof
    )

    outputs: List[Path] = []
    if _emit_csv(config):
        outputs.append(write_pvalues_csv(run.tests, out / "pvalues.csv"))
        outputs.append(write_pi0_curve_csv(estimates, out / "pi0_curve.csv"))
        outputs.extend(write_ecdf_csv(ecdf(run.tests.p), out))
    if _emit_json(config):
        outputs.append(write_fdr_json(run.fdr, out / "fdr_edges.json", run.provenance))
        outputs.append(write_pi0_json(estimates, out / "pi0.json"))
    write_manifest(config, out, seeds={"root": config.seed, "bootstrap": config.seed}, outputs=outputs)

    summary: Dict[str, Any] = {
        "n": X.n,
        "k": X.k,
        "method": config.method.value,
        "kappa": run.provenance["kappa"],
        "t_hat": run.fdr.t_hat,
        "n_rejected": run.fdr.n_rejected,
        "not_converged": list(run.fit_report.not_converged),
        "output_dir": str(out),
    }
    for method, est in estimates.items():
        summary[f"pi0_{method.value.lower()}"] = est.pi0_hat
        summary[f"pi1_{method.value.lower()}"] = 1.0 - est.pi0_hat
    return summary


def cmd_simulate(config: RunConfig) -> Dict[str, Any]:
    """Replications of the configured design; writes the report, records and table."""
    out = Path(config.output_dir)
    report = simulate(config)
    outputs: List[Path] = []
    if _emit_json(config):
        path = out / "simulation.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report.model_dump_json(by_alias=True, indent=2) + "\n", encoding="utf-8")
        outputs.append(path)
    if _emit_csv(config):
        outputs.append(write_records_csv((r.model_dump() for r in report.records), out / "records.csv"))
    table = report.table()
    table_path = out / "table.md"
    table_path.parent.mkdir(parents=True, exist_ok=True)
    table_path.write_text(table + "\n", encoding="utf-8")
    outputs.append(table_path)
    write_manifest(
        config,
        out,
        seeds={"root": config.seed, "replications": [r.seed for r in report.records]},
        outputs=outputs,
    )
    print(table, file=sys.stderr)
    return {
        "replications": len(report.records),
        "failed": len(report.failed),
        "aggregate": report.aggregate.model_dump(),
        "output_dir": str(out),
    }


def cmd_ecdf(config: RunConfig) -> Dict[str, Any]:
    """ECDF of p-values on a 512-point grid, from a file or an inline pipeline."""
    out = Path(config.output_dir)
    if config.input_path and config.pvalues_input:
        p = read_pvalues_csv(config.input_path, header=config.header)
        source = "pvalues"
    else:
        if config.input_path:
            X = read_samples_csv(config.input_path, header=config.header)
        else:
            X = sample_mvn(build_model(config.model), config.n, config.seed + 1)
        p = run_gfc(X, config.method, _kappa_for(X, config), config.alpha).tests.p
        source = "pipeline"

    e = ecdf(p)
    outputs = write_ecdf_csv(e, out, config.uniform_reference, config.jump_points)
    write_manifest(config, out, outputs=outputs)
    return {"source": source, "N": int(p.size), "output_dir": str(out)}


def cmd_oracle(config: RunConfig) -> Dict[str, Any]:
    """Run the oracle suite; the report goes to oracle.json and stdout."""
    report = run_oracle_suite(config.oracle)
    doc = report.model_dump(mode="json", by_alias=True)
    doc["passed"] = report.passed
    if _emit_json(config):
        write_json(doc, Path(config.output_dir) / "oracle.json")
    return doc


_COMMANDS = {
    Command.ESTIMATE: cmd_estimate,
    Command.SIMULATE: cmd_simulate,
    Command.ECDF: cmd_ecdf,
    Command.ORACLE: cmd_oracle,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point of the ``ggmc`` console script; returns the exit code."""
    load_environment()
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    if args.command == "serve":
        from .server import main as serve

        serve(args.verbose)
        return EXIT_OK

    if getattr(args, "threads", None) is not None:
        os.environ["GGMC_THREADS"] = str(args.threads)

    try:
        config = config_from_args(args)
        result = _COMMANDS[config.command](config)
    except Exception as e:
        logger.debug("Command failed", exc_info=True)
        print(describe_error(e), file=sys.stderr)
        return exit_code_for(e)

    print(json.dumps(result, indent=2, default=str))
    if config.command == Command.ORACLE and not result.get("passed", False):
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
