"""
Tools package for the ggmc MCP server.

- estimate: pi0 from p-values, end-to-end graph complexity from a CSV file
- oracle: closed-form oracle checks
"""

__all__ = []
