"""Run the depth study and print the solvability table.

Extra arguments are passed through to ``domfuse depth`` and override the config,
e.g. ``python3 scripts/run_depth_experiment.py --depth-max 3 --csv out/depth.csv``.
"""
import sys
from pathlib import Path

from domfuse.cli import main

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "reference_depth.cfg"

if __name__ == "__main__":
    sys.exit(main(["depth", "--config", str(CONFIG), *sys.argv[1:]]))
