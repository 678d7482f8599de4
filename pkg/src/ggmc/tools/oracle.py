"""
Oracle tools for the ggmc MCP server.
"""

import asyncio

from ..errors import describe_error
from ..models import OracleConfig, OracleRunInput, ResponseFormat
from ..oracles import run_oracle_suite
from ..server import mcp
from ..utils import format_json_response, format_markdown_table


@mcp.tool(
    name="ggmc_run_oracles",
    annotations={
        "title": "Run the Closed-Form Oracle Checks",
        "readOnlyHint": True,
        "destructiveHint": False,
        "idempotentHint": True,
        "openWorldHint": False,
    }
)
async def ggmc_run_oracles(params: OracleRunInput) -> str:
    """
    Run the oracle suite (Mehler series, Isserlis covariances, p-value CDF
    concavity, banded decay, b_n factor, condition C1) and report each check.

    Args:
        params (OracleRunInput): Validated input parameters containing:
            - seed (int): Monte Carlo seed
            - mc_reps (int): Monte Carlo replications (>= 10000)
            - response_format (ResponseFormat): 'json' or 'markdown'

    Returns:
        str: JSON report {"schema", "checks", "extras"} or a Markdown table of checks
    """
    try:
        config = OracleConfig(seed=params.seed, mc_reps=params.mc_reps)
        report = await asyncio.to_thread(run_oracle_suite, config)

        if params.response_format == ResponseFormat.MARKDOWN:
            rows = [check.model_dump() for check in report.checks]
            return format_markdown_table(
                rows,
                columns=["name", "passed", "value", "expected", "margin"],
                title=f"Oracle checks ({'all passed' if report.passed else 'FAILED'})",
                digits=6,
            )
        return format_json_response(
            report.model_dump(mode="json", by_alias=True),
            success=report.passed,
        )

    except Exception as e:
        return describe_error(e)
