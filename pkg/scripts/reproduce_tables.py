#!/usr/bin/env python3
"""Solve the bundled benchmark system with and without storage and print
the operating, capacity, and identity-check tables."""

import argparse
import sys
from importlib import resources
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from peakstore.cli import RunConfig, run


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", default=None,
                        help="scenario JSON (default: bundled paper_table1.json)")
    parser.add_argument("--out", type=Path, default=None,
                        help="also write CSV/JSON artifacts to this directory")
    parser.add_argument("--oracle", action="store_true",
                        help="cross-check both optima against the grid-search oracle")
    args = parser.parse_args()

    scenario = args.scenario or str(
        resources.files("peakstore").joinpath("scenarios", "paper_table1.json"))
    config = RunConfig(scenario_path=scenario, counterfactual=True,
                       output_dir=args.out, run_oracle=args.oracle)
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
