#!/usr/bin/env python3
"""Bound verification: a-priori suboptimality bound vs realized gap."""
import sys

from slsid.cli import main

if __name__ == "__main__":
    sys.exit(main([*sys.argv[1:], "experiment", "fig-bound"]))
