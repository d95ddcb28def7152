#!/usr/bin/env python3
"""Truncation-horizon sweep: smallest T within 2% of the 8r reference."""
import sys

from slsid.cli import main

if __name__ == "__main__":
    sys.exit(main([*sys.argv[1:], "experiment", "fig-approx"]))
