#!/usr/bin/env python3
"""Randomized solver-vs-oracle sweep.

Draws scenarios with demand baselines and costs perturbed within +/-50%,
solves each with the active-set solver, and reports the relative welfare
gap against the brute-force grid search."""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from conftest import random_scenario
from peakstore.oracle import grid_search
from peakstore.program import build_program
from peakstore.solver import solve


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--count", type=int, default=20)
    parser.add_argument("--seed", type=int, default=20260810)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    worst = 0.0
    t0 = time.perf_counter()
    print(f"{'case':>5} {'solver welfare':>18} {'oracle welfare':>18} {'rel gap':>12}")
    for k in range(args.count):
        s = random_scenario(rng)
        solver_obj = solve(build_program(s)).objective
        oracle_obj = grid_search(s).best_welfare
        gap = abs(oracle_obj - solver_obj) / max(1.0, abs(solver_obj))
        worst = max(worst, gap)
        print(f"{k:>5} {solver_obj:>18,.0f} {oracle_obj:>18,.0f} {gap:>12.2e}")
    elapsed = time.perf_counter() - t0
    print(f"\nworst relative gap {worst:.2e} over {args.count} cases "
          f"in {elapsed:.1f}s")
    return 0 if worst <= 1e-3 else 1


if __name__ == "__main__":
    sys.exit(main())
