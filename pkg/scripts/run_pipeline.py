#!/usr/bin/env python3
"""One end-to-end identify -> synthesize -> evaluate -> certify run."""
import sys

from slsid.cli import main

if __name__ == "__main__":
    sys.exit(main([*sys.argv[1:], "pipeline"]))
