"""Scaled-down ReLU training demo; thin wrapper over `ntksep relu-demo`.

    python3 scripts/relu_demo.py --out runs/relu            # n=64, k=5, 5 seeds
    python3 scripts/relu_demo.py --out runs/relu_full --full  # n=128, k=7, 20 runs (hours)
"""

import sys

from ntksep.cli import main

if __name__ == "__main__":
    sys.exit(main(["relu-demo", *sys.argv[1:]]))
