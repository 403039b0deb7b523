"""Run reports, recomputable from the event log alone.

compute_metrics consumes parsed event dicts (the JSON-lines log) and nothing
else, so `replay` on an exported log reproduces a run's metrics byte for
byte. All quantities stay integers (mW, mW*min, cents, ppm).
"""

from __future__ import annotations

import csv
import io

from .platform import canonical_json


class LogError(ValueError):
    pass


def compute_metrics(events: list) -> dict:
    started = [e for e in events if e["type"] == "run_started"]
    if not started:
        raise LogError("log has no run_started event")
    head = started[0]["payload"]
    horizon = head["horizon_slots"]
    segments = {
        s["segment_id"]: {"capacity_mw": s["capacity_mw"], "customers": s["customers"]}
        for s in head["segments"]
    }
    segment_of = {}
    for sid, seg in segments.items():
        for cid in seg["customers"]:
            segment_of[cid] = sid

    net_by_segment = {sid: [0] * horizon for sid in segments}
    seen_slots = set()
    for e in events:
        if e["type"] != "meter_reading":
            continue
        cid = e["topic"].split(".", 1)[1]
        slot = e["payload"]["slot"]
        seen_slots.add(slot)
        sid = segment_of.get(cid)
        if sid is not None:
            net_by_segment[sid][slot] += e["payload"]["net_mw"]
    if seen_slots and max(seen_slots) != horizon - 1:
        raise LogError(f"log is truncated: metering stops at slot {max(seen_slots)}")

    seg_report = {}
    for sid in sorted(segments):
        cap = segments[sid]["capacity_mw"]
        series = net_by_segment[sid]
        violations = sum(1 for v in series if v > cap)
        seg_report[sid] = {
            "capacity_mw": cap,
            "net_mw": series,
            "peak_mw": max(series) if series else 0,
            "violations": violations,
        }

    requests: dict[str, dict] = {}
    for e in events:
        if e["type"] == "shift_request":
            p = e["payload"]
            requests.setdefault(p["request_id"], {}).update(
                {
                    "requester_id": p["requester_id"],
                    "requester_role": p["requester_role"],
                    "direction": p["direction"],
                    "scope": p["scope"],
                }
            )
        elif e["type"] == "acceptance_decided":
            p = e["payload"]
            requests.setdefault(p["request_id"], {}).update(
                {
                    "channel": p["decision"],
                    "clearing_cost_ct": p["clearing_cost_ct"],
                    "exchange_cost_ct": p["exchange_cost_ct"],
                    "recorded_cost_ct": p["recorded_cost_ct"],
                }
            )
        elif e["type"] == "request_settled":
            p = e["payload"]
            requests.setdefault(p["request_id"], {}).update(
                {
                    "payouts_ct": p["payouts_ct"],
                    "fulfillment_ppm": p["fulfillment_ppm"],
                }
            )

    total_incentives = sum(
        e["payload"]["credit_ct"] for e in events if e["type"] == "incentive_credited"
    )
    total_payouts = sum(
        sum(e["payload"]["payouts_ct"].values())
        for e in events
        if e["type"] == "request_settled"
    )

    retailer_actual = 0
    retailer_exchange_only = 0
    for rid, req in requests.items():
        if req.get("requester_role") != "retailer" or "channel" not in req:
            continue
        retailer_exchange_only += req["exchange_cost_ct"] or 0
        if req["channel"] == "accepted_offers":
            retailer_actual += sum(req.get("payouts_ct", {}).values())
        else:
            retailer_actual += req["exchange_cost_ct"] or 0

    return {
        "run_id": head["run_id"],
        "scenario": head["scenario"],
        "seed": head["seed"],
        "slot_duration_minutes": head["slot_duration_minutes"],
        "horizon_slots": horizon,
        "segments": seg_report,
        "requests": {rid: requests[rid] for rid in sorted(requests)},
        "total_incentives_ct": total_incentives,
        "total_payouts_ct": total_payouts,
        "retailer_cost_actual_ct": retailer_actual,
        "retailer_cost_exchange_only_ct": retailer_exchange_only,
    }


def metrics_json(metrics: dict) -> str:
    return canonical_json(metrics)


def per_slot_csv(metrics: dict) -> str:
    """slot,segment,net_mw,capacity_mw,violation rows for every segment."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["slot", "segment", "net_mw", "capacity_mw", "violation"])
    for sid in sorted(metrics["segments"]):
        seg = metrics["segments"][sid]
        for slot, net in enumerate(seg["net_mw"]):
            writer.writerow([slot, sid, net, seg["capacity_mw"], int(net > seg["capacity_mw"])])
    return out.getvalue()
