#!/usr/bin/env python3
"""Compare exact branch-and-bound clearing against the greedy heuristic.

Generates seeded random instances above and below the exact threshold and
reports greedy's cost ratio to the optimum plus wall times, so the default
threshold (24 offers) can be sanity-checked on this machine.

    python3 scripts/solver_quality.py [--instances 200] [--offers 12]
"""

import argparse
import os
import random
import statistics
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from dsmsim.clearing import ClearingOffer, solve
from dsmsim.core import PowerProfile, TimeGrid

GRID = TimeGrid(15, 96)


def random_instance(rng, n_offers):
    n_slots = rng.randint(1, 4)
    start = rng.randint(0, 80)
    target = PowerProfile(GRID, start, tuple(rng.randint(2, 12) * 1_000_000 for _ in range(n_slots)))
    offers = []
    for i in range(n_offers):
        o_start = start + rng.randint(0, n_slots - 1)
        o_len = rng.randint(1, n_slots - (o_start - start))
        vals = tuple(rng.randint(1, 8) * 1_000_000 for _ in range(o_len))
        offers.append(ClearingOffer(f"o{i:02d}", PowerProfile(GRID, o_start, vals), rng.randint(1, 900)))
    return target, offers


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--instances", type=int, default=200)
    parser.add_argument("--offers", type=int, default=12)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    ratios = []
    exact_times = []
    greedy_times = []
    greedy_infeasible = 0
    feasible = 0
    for _ in range(args.instances):
        target, offers = random_instance(rng, args.offers)
        t0 = time.perf_counter()
        exact = solve(target, offers)
        exact_times.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        greedy = solve(target, offers, exact_threshold=0)
        greedy_times.append(time.perf_counter() - t0)
        if not exact.feasible:
            continue
        feasible += 1
        if not greedy.feasible:
            greedy_infeasible += 1
        elif exact.total_price_ct > 0:
            ratios.append(greedy.total_price_ct / exact.total_price_ct)

    print(f"instances: {args.instances} ({feasible} feasible), offers per instance: {args.offers}")
    print(f"exact  mean {statistics.mean(exact_times) * 1e3:.2f} ms, max {max(exact_times) * 1e3:.2f} ms")
    print(f"greedy mean {statistics.mean(greedy_times) * 1e3:.2f} ms, max {max(greedy_times) * 1e3:.2f} ms")
    if ratios:
        print(
            f"greedy/optimal cost ratio: mean {statistics.mean(ratios):.4f}, "
            f"p95 {sorted(ratios)[int(0.95 * len(ratios)) - 1]:.4f}, max {max(ratios):.4f}"
        )
        optimal = sum(1 for r in ratios if r == 1.0)
        print(f"greedy optimal on {optimal}/{len(ratios)} priced instances")
    if greedy_infeasible:
        print(f"greedy failed to cover {greedy_infeasible} instances the exact solver covered")


if __name__ == "__main__":
    main()
