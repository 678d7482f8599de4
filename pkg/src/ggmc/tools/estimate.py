"""
Estimation tools for the ggmc MCP server.

This module provides tools for estimating the proportion of true nulls from a
list of p-values, and the graph complexity (edge proportion) of a Gaussian
graphical model from a CSV data file.
"""

import asyncio
from typing import Any, Dict

from ..errors import describe_error
from ..gfc import run_gfc, select_kappa
from ..models import GraphComplexityInput, Pi0EstimateInput, Pi0Selection, ResponseFormat
from ..pi0 import estimate_pi0, fixed_lambda_pi0
from ..sampler import read_samples_csv
from ..server import mcp
from ..utils import format_json_response, format_markdown_list, format_markdown_table


def _pi0_summary(params: Pi0EstimateInput) -> Dict[str, Any]:
    estimates = estimate_pi0(params.pvalues, params.method, B=params.B, seed=params.seed)
    rows = [
        {
            "method": method.value,
            "pi0_hat": est.pi0_hat,
            "pi1_hat": 1.0 - est.pi0_hat,
            "selected_lambda": est.selected_lambda,
        }
        for method, est in estimates.items()
    ]
    if params.lambda_value is not None:
        fixed = fixed_lambda_pi0(params.pvalues, params.lambda_value)
        rows.append(
            {
                "method": fixed.method.value,
                "pi0_hat": fixed.pi0_hat,
                "pi1_hat": 1.0 - fixed.pi0_hat,
                "selected_lambda": fixed.selected_lambda,
            }
        )
    return {"N": len(params.pvalues), "estimates": rows}


@mcp.tool(
    name="ggmc_estimate_pi0",
    annotations={
        "title": "Estimate the Proportion of True Null Hypotheses",
        "readOnlyHint": True,
        "destructiveHint": False,
        "idempotentHint": True,
        "openWorldHint": False,
    }
)
async def ggmc_estimate_pi0(params: Pi0EstimateInput) -> str:
    """
    Estimate pi0, the proportion of true nulls, from a list of p-values.

    Uses Storey's tail-count estimator #{p > lambda} / (N (1 - lambda)) with
    lambda tuned by a cubic smoothing spline, by bootstrap MSE, or both.

    Args:
        params (Pi0EstimateInput): Validated input parameters containing:
            - pvalues (List[float]): P-values in [0, 1]
            - method (Pi0Selection): 'smoother', 'bootstrap' or 'both'
            - lambda_value (Optional[float]): Also report the estimate at this lambda
            - B (int): Bootstrap resamples (default 100)
            - seed (int): Bootstrap seed
            - response_format (ResponseFormat): 'json' or 'markdown'

    Returns:
        str: JSON or Markdown formatted estimates

            Success (JSON):
            {
                "success": true,
                "data": {
                    "N": int,
                    "estimates": [{"method": str, "pi0_hat": float, "pi1_hat": float,
                                   "selected_lambda": float}]
                }
            }

            Error:
            "Error: <detailed error message with suggestions>"

    Examples:
        - Both selectors: params with pvalues=[...], method="both"
        - Fixed lambda only alongside the smoother: method="smoother", lambda_value=0.5
    """
    try:
        summary = await asyncio.to_thread(_pi0_summary, params)

        if params.response_format == ResponseFormat.MARKDOWN:
            return format_markdown_table(
                summary["estimates"], title=f"pi0 estimates (N = {summary['N']})"
            )
        return format_json_response(summary)

    except Exception as e:
        return describe_error(e)


def _graph_summary(params: GraphComplexityInput) -> Dict[str, Any]:
    X = read_samples_csv(params.input_path, header=params.header)
    kappa = select_kappa(X, params.method).kappa if params.tune_kappa else params.kappa
    run = run_gfc(X, params.method, kappa, params.alpha)
    estimates = estimate_pi0(run.tests.p, Pi0Selection.BOTH)
    summary: Dict[str, Any] = {
        "n": X.n,
        "k": X.k,
        "pairs": run.tests.n_pairs,
        "method": params.method.value,
        "alpha": params.alpha,
        "kappa": kappa,
        "t_hat": run.fdr.t_hat,
        "n_rejected": run.fdr.n_rejected,
        "not_converged": len(run.fit_report.not_converged),
    }
    for method, est in estimates.items():
        key = method.value.lower()
        summary[f"pi0_{key}"] = est.pi0_hat
        summary[f"pi1_{key}"] = 1.0 - est.pi0_hat
    return summary


@mcp.tool(
    name="ggmc_estimate_graph_complexity",
    annotations={
        "title": "Estimate the Edge Proportion of a Gaussian Graphical Model",
        "readOnlyHint": True,
        "destructiveHint": False,
        "idempotentHint": True,
        "openWorldHint": False,
    }
)
async def ggmc_estimate_graph_complexity(params: GraphComplexityInput) -> str:
    """
    Run the full pipeline on a CSV data file and report pi0 and pi1.

    Fits node-wise (scaled) Lasso regressions, computes the GFC edge-wise
    p-values and the FDR threshold, then estimates pi0 with both selectors.

    Args:
        params (GraphComplexityInput): Validated input parameters containing:
            - input_path (str): CSV file, one observation per row (n >= 10, k >= 3)
            - header (bool): First row holds variable names
            - method (GfcMethod): 'GFC_L' or 'GFC_SL' (default)
            - alpha (float): FDR level
            - kappa (float): Penalty multiplier
            - tune_kappa (bool): Pick kappa from the tail-calibration grid instead
            - response_format (ResponseFormat): 'json' or 'markdown'

    Returns:
        str: JSON or Markdown summary with t_hat, the number of detected
        edges and pi0 / pi1 from the smoother and the bootstrap

            Error:
            "Error: <detailed error message with suggestions>"
    """
    try:
        summary = await asyncio.to_thread(_graph_summary, params)

        if params.response_format == ResponseFormat.MARKDOWN:
            return format_markdown_list(summary, title="Graph complexity")
        return format_json_response(summary)

    except Exception as e:
        return describe_error(e)
