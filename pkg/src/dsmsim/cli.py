"""Command line: simulate | serve | clear | replay."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import clearing
from .metrics import LogError, compute_metrics, metrics_json, per_slot_csv
from .platform import canonical_json
from .scenario import ScenarioError, load_scenario
from .simulation import Simulation

EXIT_OK = 0
EXIT_USAGE = 2


def _cmd_simulate(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except (OSError, ScenarioError) as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return EXIT_USAGE
    sim = Simulation(scenario, seed=args.seed)
    metrics = sim.run()
    os.makedirs(args.out, exist_ok=True)
    log_path = os.path.join(args.out, "events.jsonl")
    with open(log_path, "w") as f:
        for line in sim.export_log_lines():
            f.write(line + "\n")
    with open(os.path.join(args.out, "metrics.json"), "w") as f:
        f.write(metrics_json(metrics) + "\n")
    with open(os.path.join(args.out, "slots.csv"), "w") as f:
        f.write(per_slot_csv(metrics))
    print(f"run {sim.run_id}: {len(sim.broker.log_events())} events -> {args.out}")
    for sid, seg in sorted(metrics["segments"].items()):
        print(f"  segment {sid}: peak {seg['peak_mw'] / 1e6:.2f} kW, violations {seg['violations']}")
    print(
        f"  incentives {metrics['total_incentives_ct']} ct, payouts {metrics['total_payouts_ct']} ct"
    )
    return EXIT_OK


def _cmd_serve(args) -> int:
    from .api import serve  # imported lazily: the CLI mostly runs batch

    try:
        scenario = load_scenario(args.scenario)
    except (OSError, ScenarioError) as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return EXIT_USAGE
    mode = "batch" if args.batch else "interactive"
    try:
        httpd, service = serve(
            scenario, args.port, seed=args.seed, mode=mode, pause_seconds=args.pause_seconds
        )
    except OSError as e:
        print(f"cannot bind port {args.port}: {e}", file=sys.stderr)
        return EXIT_USAGE
    print(f"serving {service.sim.run_id} on http://127.0.0.1:{args.port} ({mode} mode)")
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.shutdown()
    return EXIT_OK


def _cmd_clear(args) -> int:
    try:
        target, offers, budget, threshold = clearing.load_instance_file(args.instance)
    except (OSError, clearing.InstanceError) as e:
        print(f"instance error: {e}", file=sys.stderr)
        return EXIT_USAGE
    outcome = clearing.solve(target, offers, budget, threshold)
    print(canonical_json(outcome.to_json_obj()))
    if outcome.feasible:
        print(
            f"selected {', '.join(outcome.selected)} at {outcome.total_price_ct} cents"
            f" ({outcome.method})"
        )
    else:
        print("infeasible: no offer combination covers the target", file=sys.stderr)
    return EXIT_OK


def _cmd_replay(args) -> int:
    try:
        with open(args.log) as f:
            events = [json.loads(line) for line in f if line.strip()]
    except (OSError, json.JSONDecodeError) as e:
        print(f"log error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        metrics = compute_metrics(events)
    except LogError as e:
        print(f"log error: {e}", file=sys.stderr)
        return EXIT_USAGE
    print(metrics_json(metrics))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsmsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario to completion and write reports")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=None, help="overrides the scenario seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("serve", help="expose a run over HTTP for the console")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--port", type=int, default=8423)
    p.add_argument("--batch", action="store_true", help="run to completion before serving")
    p.add_argument(
        "--pause-seconds",
        type=float,
        default=2.0,
        help="how long the override window stays open each slot",
    )
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("clear", help="solve a standalone clearing instance file")
    p.add_argument("instance")
    p.set_defaults(func=_cmd_clear)

    p = sub.add_parser("replay", help="recompute metrics from an exported event log")
    p.add_argument("--log", required=True)
    p.set_defaults(func=_cmd_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
