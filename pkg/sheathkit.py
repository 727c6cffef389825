"""
Command line entry point.

    python sheathkit.py stationary --config data/examples/stationary.toml --out runs/stationary.csv
"""

import sys

from utils.cli import main

if __name__ == "__main__":
    sys.exit(main())
