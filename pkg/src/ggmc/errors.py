"""
Error handling utilities for the ggmc package.

This module defines the exception hierarchy raised by the numerical modules
and converts any exception into an actionable message (and CLI exit code)
for users of the command line and MCP tools.
"""

from typing import Any, Dict, Optional

import pydantic


class GgmcError(Exception):
    """Base exception for all ggmc errors."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.details = details or {}
        super().__init__(message)


class InvalidSpec(GgmcError):
    """Raised when a model specification violates its constraints."""
    pass


class NotPositiveDefinite(GgmcError):
    """Raised when a matrix that must be SPD is not (after any jitter)."""

    def __init__(self, message: str, jitter_tried: float = 0.0):
        super().__init__(message, {"jitter_tried": jitter_tried})
        self.jitter_tried = jitter_tried


class DidNotConverge(GgmcError):
    """Raised by an iterative solver that hit max_iter; carries the partial fit."""

    def __init__(self, message: str, fit: Any = None):
        super().__init__(message)
        self.fit = fit


class DegenerateScale(GgmcError):
    """Raised when the scaled Lasso noise estimate collapses to zero."""
    pass


class DegenerateResidual(GgmcError):
    """Raised when a node-wise residual variance is (numerically) zero."""

    def __init__(self, message: str, node: Optional[int] = None):
        super().__init__(message, {"node": node})
        self.node = node


class InvalidLambda(GgmcError):
    """Raised when a Storey tuning parameter lies outside [0, 1)."""
    pass


class GridTooSmall(GgmcError):
    """Raised when a lambda grid is unsorted, out of range or too short."""
    pass


class InvalidRho(GgmcError):
    """Raised when a correlation parameter lies outside (-1, 1)."""
    pass


class NotBanded(GgmcError):
    """Raised when a covariance matrix has entries beyond its declared band."""
    pass


class MalformedInput(GgmcError):
    """Raised when an input file cannot be parsed into a numeric matrix."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[str] = None):
        super().__init__(message, {"line": line, "column": column})
        self.line = line
        self.column = column


class SimulationBudgetExceeded(GgmcError):
    """Raised when too many simulation replications fail."""

    def __init__(self, message: str, failed: int, total: int):
        super().__init__(message, {"failed": failed, "total": total})
        self.failed = failed
        self.total = total


EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_MALFORMED_INPUT = 2
EXIT_DEGENERATE = 3


def exit_code_for(e: Exception) -> int:
    """
    Map an exception to the CLI exit code.

    Args:
        e: The exception raised while running a command

    Returns:
        int: 2 for malformed input or invalid configuration, 3 for degenerate
        residuals, 1 for everything else
    """
    if isinstance(e, (MalformedInput, pydantic.ValidationError, InvalidSpec)):
        return EXIT_MALFORMED_INPUT
    if isinstance(e, (DegenerateResidual, DegenerateScale)):
        return EXIT_DEGENERATE
    return EXIT_FAILURE


def describe_error(e: Exception) -> str:
    """
    Transform an exception into a clear, actionable error message.

    Args:
        e: The exception to describe

    Returns:
        str: "Error: ..." line followed by a "Suggestion: ..." line
    """
    if isinstance(e, MalformedInput):
        where = ""
        if e.line is not None:
            where = f" (line {e.line}"
            where += f", column {e.column})" if e.column is not None else ")"
        return (
            f"Error: Malformed input{where} - {e.message}\n"
            "Suggestion: The input must be comma-separated numbers, one observation per row. "
            "Use --header if the first row holds variable names."
        )

    elif isinstance(e, pydantic.ValidationError):
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        return (
            f"Error: Invalid configuration - {problems}\n"
            "Suggestion: Check the numeric ranges of your flags or config file."
        )

    elif isinstance(e, DegenerateResidual):
        node = f" for variable {e.node + 1}" if e.node is not None else ""
        return (
            f"Error: Zero residual variance{node} - {e.message}\n"
            "Suggestion: Remove constant or exactly collinear columns before estimation."
        )

    elif isinstance(e, DegenerateScale):
        return (
            f"Error: {e.message}\n"
            "Suggestion: The scaled Lasso fit interpolates the data; use --method lasso "
            "or increase --kappa."
        )

    elif isinstance(e, NotPositiveDefinite):
        return (
            f"Error: {e.message}\n"
            "Suggestion: The covariance is singular or nearly so. Allow jitter or check the "
            "model parameters."
        )

    elif isinstance(e, InvalidSpec):
        return f"Error: Invalid model specification - {e.message}\nSuggestion: {_spec_hint()}"

    elif isinstance(e, (InvalidLambda, GridTooSmall)):
        return (
            f"Error: {e.message}\n"
            "Suggestion: Use a sorted lambda grid inside [0, 0.95] with at least 4 points."
        )

    elif isinstance(e, SimulationBudgetExceeded):
        return (
            f"Error: {e.message}\n"
            "Suggestion: Inspect the per-replication warnings; a larger n or smaller kappa "
            "usually stabilises the node-wise fits."
        )

    elif isinstance(e, GgmcError):
        return f"Error: {e.message}"

    else:
        error_type = type(e).__name__
        return (
            f"Error: Unexpected {error_type} occurred - {e}\n"
            "Suggestion: Re-run with --verbose and report the issue if it persists."
        )


def _spec_hint() -> str:
    return (
        "Block designs need 0 < rho < 1 and a block size dividing k; the band graph needs "
        "k >= 3; Erdos-Renyi needs 0 < q < 1 and u_lo < u_hi."
    )
