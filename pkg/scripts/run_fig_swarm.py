#!/usr/bin/env python3
"""Monte Carlo swarm: relative improvement of robust over nominal synthesis."""
import sys

from slsid.cli import main

if __name__ == "__main__":
    sys.exit(main([*sys.argv[1:], "experiment", "fig-swarm"]))
