"""
Entry point for running ggmc as a module.

Usage:
    python -m ggmc estimate --input data.csv
"""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
