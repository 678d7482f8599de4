"""
Utility functions for ggmc.

This module provides shared helpers for:
- Response formatting (JSON/Markdown) for the CLI and MCP tools
- Writing result artifacts (p-values, FDR edges, pi0 estimates, ECDF, manifest)

CSV files use '.' as the decimal separator and full float precision; JSON
files carry a "schema" version field.
"""

import json
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Iterable, List, Optional

import numpy as np
import pandas as pd

if TYPE_CHECKING:
    from .models import Ecdf, FdrResult, Pi0Estimate, Pi0Method, RunConfig, TestResults

SCHEMA_VERSION = 1
FLOAT_FORMAT = "%.17g"
ECDF_GRID_POINTS = 512


def format_json_response(
    data: Any,
    success: bool = True,
    message: Optional[str] = None,
) -> str:
    """
    Format data as JSON string for tool responses.

    Args:
        data: The data to format
        success: Whether the operation was successful
        message: Optional message to include

    Returns:
        str: Formatted JSON string
    """
    response: Dict[str, Any] = {"success": success}

    if message:
        response["message"] = message

    if isinstance(data, dict) and "error" in data:
        response["error"] = data["error"]
    else:
        response["data"] = data

    return json.dumps(response, indent=2, default=_json_default)


def format_markdown_table(
    data: List[Dict[str, Any]],
    columns: Optional[List[str]] = None,
    title: Optional[str] = None,
    digits: int = 3,
) -> str:
    """
    Format records as a markdown table.

    Args:
        data: List of records to format
        columns: Optional list of columns to include (uses all keys if None)
        title: Optional title for the table
        digits: Decimal places for floats

    Returns:
        str: Formatted markdown table
    """
    if not data:
        return "No records found."

    if not columns:
        columns = list(data[0].keys())

    lines = []
    if title:
        lines.append(f"## {title}")
        lines.append("")

    lines.append("| " + " | ".join(columns) + " |")
    lines.append("| " + " | ".join(["---"] * len(columns)) + " |")

    for record in data:
        row_values = []
        for col in columns:
            value = record.get(col, "")
            if value is None:
                value = ""
            elif isinstance(value, bool):
                value = "✓" if value else "✗"
            elif isinstance(value, (float, np.floating)):
                value = f"{value:.{digits}f}"
            elif isinstance(value, (list, dict)):
                value = json.dumps(value, default=_json_default)
            else:
                value = str(value)
            row_values.append(value.replace("|", "\\|"))
        lines.append("| " + " | ".join(row_values) + " |")

    return "\n".join(lines)


def format_markdown_list(
    data: Dict[str, Any],
    title: Optional[str] = None,
) -> str:
    """
    Format a flat record as a markdown bullet list.

    Args:
        data: Field name to value
        title: Optional heading

    Returns:
        str: Markdown list
    """
    lines = []
    if title:
        lines.append(f"# {title}")
        lines.append("")
    for field, value in data.items():
        if value is None:
            continue
        if isinstance(value, bool):
            value = "Yes" if value else "No"
        elif isinstance(value, (float, np.floating)):
            value = f"{value:.4f}"
        elif isinstance(value, (list, dict)):
            value = json.dumps(value, default=_json_default)
        lines.append(f"- **{field.replace('_', ' ').title()}**: {value}")
    return "\n".join(lines)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return str(value)


# ====================
# Artifact writers
# ====================

def write_json(data: Dict[str, Any], path: Path) -> Path:
    """Write a JSON document (stable key order as given, trailing newline)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, default=_json_default) + "\n", encoding="utf-8")
    return path


def _write_frame(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def write_pvalues_csv(tests: "TestResults", path: Path) -> Path:
    """One row per pair: 1-based indices i < j, statistic T and p-value."""
    frame = pd.DataFrame(
        {"i": tests.rows + 1, "j": tests.cols + 1, "T": tests.t, "p": tests.p}
    )
    return _write_frame(frame, path)


def write_fdr_json(fdr: "FdrResult", path: Path, provenance: Optional[Dict[str, Any]] = None) -> Path:
    doc = fdr.to_json_dict()
    if provenance:
        doc["provenance"] = provenance
    return write_json(doc, path)


def pi0_document(estimates: Dict["Pi0Method", "Pi0Estimate"]) -> Dict[str, Any]:
    return {
        "schema": SCHEMA_VERSION,
        "estimates": {method.value: est.to_json_dict() for method, est in estimates.items()},
    }


def write_pi0_json(estimates: Dict["Pi0Method", "Pi0Estimate"], path: Path) -> Path:
    return write_json(pi0_document(estimates), path)


def write_pi0_curve_csv(estimates: Dict["Pi0Method", "Pi0Estimate"], path: Path) -> Path:
    """lambda, W and pi0_hat(lambda) plus the smoothed curve and bootstrap MSE when present."""
    first = next(iter(estimates.values()))
    frame = pd.DataFrame({"lambda": first.lambda_grid, "W": first.W, "pi0_hat": first.curve})
    for est in estimates.values():
        if est.smoothed is not None:
            frame["smoothed"] = est.smoothed
        if est.mse is not None:
            frame["bootstrap_mse"] = est.mse
    return _write_frame(frame, path)


def ecdf_frame(e: "Ecdf", uniform_reference: bool = False) -> pd.DataFrame:
    """F_N on the grid lambda = g / 511, g = 0..511."""
    grid = np.arange(ECDF_GRID_POINTS) / (ECDF_GRID_POINTS - 1)
    frame = pd.DataFrame({"lambda": grid, "F_N": e(grid)})
    if uniform_reference:
        frame["uniform"] = grid
    return frame


def ecdf_jump_frame(e: "Ecdf") -> pd.DataFrame:
    """Step vertices: (x, F_N(x-)) and (x, F_N(x)) for every jump point x."""
    x = np.repeat(e.support, 2)
    heights = np.column_stack((e.left_limits(), e.heights)).ravel()
    return pd.DataFrame({"x": x, "F_N": heights})


def write_ecdf_csv(
    e: "Ecdf",
    directory: Path,
    uniform_reference: bool = False,
    jump_points: bool = False,
) -> List[Path]:
    paths = [_write_frame(ecdf_frame(e, uniform_reference), Path(directory) / "ecdf.csv")]
    if jump_points:
        paths.append(_write_frame(ecdf_jump_frame(e), Path(directory) / "ecdf_jumps.csv"))
    return paths


def write_records_csv(records: Iterable[Dict[str, Any]], path: Path) -> Path:
    return _write_frame(pd.DataFrame(list(records)), path)


def package_versions() -> Dict[str, str]:
    import pydantic
    import scipy

    from . import __version__

    return {
        "ggmc": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "pydantic": pydantic.__version__,
    }


def write_manifest(
    config: "RunConfig",
    directory: Path,
    seeds: Optional[Dict[str, Any]] = None,
    outputs: Optional[List[Path]] = None,
) -> Path:
    """
    Run manifest: the full config, package versions, seeds and the output files.
    This is the only artifact carrying a timestamp.
    """
    doc = {
        "schema": SCHEMA_VERSION,
        "config": config.model_dump(mode="json", by_alias=True),
        "versions": package_versions(),
        "seeds": seeds or {"root": config.seed},
        "outputs": sorted(Path(p).name for p in outputs or []),
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    return write_json(doc, Path(directory) / "manifest.json")
