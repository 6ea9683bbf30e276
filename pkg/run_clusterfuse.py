#!/usr/bin/env python3
"""
Entry script for the clusterfuse command-line tools.

Usage:
    python run_clusterfuse.py estimate --input data.csv --lambda1 0.1 --lambda2 1 --q 2 --output model.json
    python run_clusterfuse.py simulate --scenario block_er --p 20 --n 200 --reps 10 --grid-file grid.json --output sims.csv
"""

import sys

from cli.main import main

if __name__ == "__main__":
    sys.exit(main())
