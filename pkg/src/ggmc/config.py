"""
Environment configuration for ggmc.

Settings are read from the process environment (optionally populated from a
``.env`` file by ``load_dotenv`` at the entry points):

- GGMC_THREADS: worker cap for node fits, bootstrap and replications (0 = auto)
- GGMC_DEBUG: "true" enables debug logging
- GGMC_OUTPUT_DIR: default output directory for CLI artifacts
- GGMC_TRANSPORT: MCP server transport (only "stdio" is supported)
"""

import logging
import os
import sys

from dotenv import load_dotenv

DEFAULT_OUTPUT_DIR = "ggmc-out"


def load_environment() -> None:
    """Load a .env file from the working directory, if present."""
    load_dotenv()


def thread_count() -> int:
    """
    Number of workers to use for parallel sections.

    Returns:
        int: GGMC_THREADS if positive, otherwise the CPU count
    """
    raw = os.getenv("GGMC_THREADS", "0").strip() or "0"
    try:
        requested = int(raw)
    except ValueError:
        logging.getLogger(__name__).warning("Ignoring non-integer GGMC_THREADS=%r", raw)
        requested = 0
    if requested > 0:
        return requested
    return os.cpu_count() or 1


def debug_enabled() -> bool:
    """Whether GGMC_DEBUG asks for debug logging."""
    return os.getenv("GGMC_DEBUG", "false").lower() in ("true", "yes", "1", "on")


def output_dir() -> str:
    """Default output directory for CLI artifacts."""
    return os.getenv("GGMC_OUTPUT_DIR", DEFAULT_OUTPUT_DIR)


def configure_logging(verbose: bool = False) -> None:
    """
    Send log records to stderr so stdout stays reserved for results.

    Args:
        verbose: Force DEBUG level regardless of GGMC_DEBUG
    """
    level = logging.DEBUG if (verbose or debug_enabled()) else logging.WARNING
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="[ggmc] %(levelname)s %(name)s: %(message)s",
        force=True,
    )
