"""
MCP server for ggmc.

This module initializes the FastMCP server and registers the estimation and
oracle tools. Only the stdio transport is offered.
"""

import logging
import os

from mcp.server.fastmcp import FastMCP

from .config import configure_logging, load_environment

load_environment()

mcp = FastMCP("ggmc")

# Tool modules register themselves with the @mcp.tool decorator on import.
import ggmc.tools.estimate  # noqa: E402,F401
import ggmc.tools.oracle  # noqa: E402,F401

logger = logging.getLogger(__name__)


def main(verbose: bool = False):
    """
    Main entry point for the MCP server.

    Reads GGMC_TRANSPORT (stdio only) and starts the server; logs go to stderr.
    """
    configure_logging(verbose)
    transport = os.getenv("GGMC_TRANSPORT", "stdio").lower()
    if transport != "stdio":
        logger.warning("Transport %r is not supported; using stdio", transport)
    logger.debug("Starting ggmc MCP server on stdio")
    mcp.run()


if __name__ == "__main__":
    main()
