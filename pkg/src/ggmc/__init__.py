"""
ggmc: graph complexity of Gaussian graphical models.

This package estimates the proportion of edges (pi1 = 1 - pi0) of a Gaussian
graphical model from n x k data without recovering the graph itself:

- node-wise Lasso / scaled Lasso regressions and GFC edge-wise tests
- an FDR-calibrated edge threshold
- Storey's pi0 estimator with smoothing-spline and bootstrap tuning
- simulation designs, a Monte Carlo harness and closed-form oracle checks

Entry points: the ``ggmc`` command line and an MCP server (``ggmc serve``).
"""

__version__ = "1.0.0"

__all__ = ["__version__"]
