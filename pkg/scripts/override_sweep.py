#!/usr/bin/env python3
"""Sweep how many customers veto their signals in the grid-overload scenario.

For k = 0..3 overriding customers, reports peak load, capacity violations,
manager payouts and customer incentives. Shows the pay-for-performance
mechanism degrading gracefully: every override shrinks delivery and payment
together, and the peak returns once the covering set is broken.

    python3 scripts/override_sweep.py [--at-slot 20]
"""

import argparse
import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from dsmsim.scenario import parse_scenario
from dsmsim.simulation import Simulation

SCENARIO = os.path.join(os.path.dirname(__file__), "..", "scenarios", "grid_overload.json")
CUSTOMERS = ["cust-1", "cust-2", "cust-3"]


def run_with_overrides(base, customers, at_slot):
    obj = json.loads(json.dumps(base))
    obj["scripted_overrides"] = [{"at_slot": at_slot, "customer": c} for c in customers]
    sim = Simulation(parse_scenario(obj))
    metrics = sim.run()
    seg = metrics["segments"]["seg-1"]
    return {
        "overrides": len(customers),
        "peak_kw": seg["peak_mw"] / 1e6,
        "violations": seg["violations"],
        "payouts_ct": metrics["total_payouts_ct"],
        "incentives_ct": metrics["total_incentives_ct"],
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--at-slot", type=int, default=20)
    args = parser.parse_args()
    with open(SCENARIO) as f:
        base = json.load(f)
    print(f"{'overrides':>9}  {'peak kW':>8}  {'violations':>10}  {'payouts ct':>10}  {'incentives ct':>13}")
    for k in range(len(CUSTOMERS) + 1):
        row = run_with_overrides(base, CUSTOMERS[:k], args.at_slot)
        print(
            f"{row['overrides']:>9}  {row['peak_kw']:>8.1f}  {row['violations']:>10}"
            f"  {row['payouts_ct']:>10}  {row['incentives_ct']:>13}"
        )


if __name__ == "__main__":
    main()
