"""Run the parameter sweep and write one CSV row per grid point.

Defaults to ``out/sweep.csv``; pass ``--csv PATH`` or any other ``domfuse sweep`` flag to override.
"""
import sys
from pathlib import Path

from domfuse.cli import main

ROOT = Path(__file__).resolve().parent.parent
CONFIG = ROOT / "configs" / "reference_sweep.cfg"

if __name__ == "__main__":
    argv = sys.argv[1:]
    if "--csv" not in argv:
        argv += ["--csv", str(ROOT / "out" / "sweep.csv")]
    sys.exit(main(["sweep", "--config", str(CONFIG), *argv]))
