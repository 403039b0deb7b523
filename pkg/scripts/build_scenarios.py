#!/usr/bin/env python3
"""Regenerate the shipped example scenarios.

grid_overload: a feeder peaks 6 kW over its 50 kW limit for one slot; the
operator's request is covered by three contracted washers.

retailer_arbitrage: a retailer asks its portfolio for shifts while exchange
quotes swing, so some requests clear on the marketplace and others fall back
to the exchange.
"""

import json
import os

OUT = os.path.join(os.path.dirname(__file__), "..", "scenarios")


def flat(value, n=96, **overrides):
    series = [value] * n
    for slot, v in overrides.items():
        series[int(slot)] = v
    return series


def grid_overload():
    washers = lambda cid: [
        {
            "device_id": f"washer-{cid}",
            "kind": "deferrable",
            "power_kw": 2.0,
            "duration_slots": 1,
            "earliest_start": 40,
            "deadline": 47,
        }
    ]
    return {
        "name": "grid_overload",
        "seed": 7,
        "time_grid": {"slot_duration_minutes": 15, "horizon_slots": 96},
        "default_tariff_ct_per_kwh": 30,
        "exchange_quotes_ct_per_kwh": 200,
        "outdoor_temperature_c": 10.0,
        "grid_trigger": {"enabled": True, "lookahead_slots": 96},
        "actors": {
            "grid_operators": [{"id": "grid-op", "token": "tok-grid-op"}],
            "retailers": [],
            "managers": [
                {
                    "id": "mgr-a",
                    "token": "tok-mgr-a",
                    "policy": {
                        "margin_fraction": "0.2",
                        "max_offer_fraction": "1.0",
                        "price_jitter_fraction": "0.05",
                    },
                },
                {
                    "id": "mgr-b",
                    "token": "tok-mgr-b",
                    "policy": {
                        "margin_fraction": "0.25",
                        "max_offer_fraction": "1.0",
                        "price_jitter_fraction": "0.05",
                    },
                },
            ],
            "customers": [
                {
                    "id": "cust-1",
                    "token": "tok-cust-1",
                    "devices": [
                        {
                            "device_id": "base-1",
                            "kind": "fixed",
                            "profile": {"start_slot": 0, "values_kw": flat(10.0)},
                        }
                    ]
                    + washers("cust-1"),
                },
                {
                    "id": "cust-2",
                    "token": "tok-cust-2",
                    "devices": [
                        {
                            "device_id": "base-2",
                            "kind": "fixed",
                            "profile": {"start_slot": 0, "values_kw": flat(10.0)},
                        }
                    ]
                    + washers("cust-2"),
                },
                {
                    "id": "cust-3",
                    "token": "tok-cust-3",
                    "devices": [
                        {
                            "device_id": "base-3",
                            "kind": "fixed",
                            "profile": {"start_slot": 0, "values_kw": flat(10.0)},
                        }
                    ]
                    + washers("cust-3"),
                },
                {
                    "id": "cust-4",
                    "token": "tok-cust-4",
                    "devices": [
                        {
                            "device_id": "base-4",
                            "kind": "fixed",
                            # the evening peak that tips the feeder over its limit
                            "profile": {"start_slot": 0, "values_kw": flat(14.0, **{"40": 20.0})},
                        }
                    ],
                },
            ],
        },
        "segments": [
            {
                "id": "seg-1",
                "capacity_kw": 50.0,
                "customers": ["cust-1", "cust-2", "cust-3", "cust-4"],
            }
        ],
        "programmes": [
            {
                "id": "prog-a",
                "manager": "mgr-a",
                "tariff_ct_per_kwh": 30,
                "incentive_rate_ct_per_kwh": 10,
                "max_signals_per_day": 4,
                "description": "peak-shaving contract, 10 ct/kWh delivered",
            },
            {
                "id": "prog-b",
                "manager": "mgr-b",
                "tariff_ct_per_kwh": 30,
                "incentive_rate_ct_per_kwh": 12,
                "max_signals_per_day": 4,
                "description": "peak-shaving contract, 12 ct/kWh delivered",
            },
        ],
        "subscriptions": [
            {"customer": "cust-1", "programme": "prog-a"},
            {"customer": "cust-2", "programme": "prog-a"},
            {"customer": "cust-3", "programme": "prog-b"},
        ],
        "scripted_requests": [],
        "scripted_overrides": [],
    }


def retailer_arbitrage():
    quotes = flat(200)
    for t in range(6, 16):
        quotes[t] = 30  # cheap morning exchange undercuts the offers
    for t in range(46, 52):
        quotes[t] = 450  # scarce evening: offers win
    # retail tariff valley 48..64 pulls the EV baseline into the evening
    tariff = flat(25)
    for t in range(48, 64):
        tariff[t] = 10
    return {
        "name": "retailer_arbitrage",
        "seed": 11,
        "time_grid": {"slot_duration_minutes": 15, "horizon_slots": 96},
        "default_tariff_ct_per_kwh": 25,
        "exchange_quotes_ct_per_kwh": quotes,
        "outdoor_temperature_c": 5.0,
        "grid_trigger": {"enabled": False, "lookahead_slots": 0},
        "actors": {
            "grid_operators": [],
            "retailers": [{"id": "retail-1", "token": "tok-retail-1", "portfolio": "pf-retail-1"}],
            "managers": [
                {
                    "id": "mgr-a",
                    "token": "tok-mgr-a",
                    "policy": {
                        "margin_fraction": "0.2",
                        "max_offer_fraction": "0.9",
                        "price_jitter_fraction": "0.05",
                    },
                }
            ],
            "customers": [
                {
                    "id": "cust-ev",
                    "token": "tok-cust-ev",
                    "portfolio": "pf-retail-1",
                    "pv_kw": flat(0.0, **{str(t): 1.0 for t in range(36, 52)}),
                    "devices": [
                        {
                            "device_id": "base-ev",
                            "kind": "fixed",
                            "profile": {"start_slot": 0, "values_kw": flat(1.0)},
                        },
                        {
                            "device_id": "car",
                            "kind": "ev_charger",
                            "required_kwh": 6.0,
                            "arrival_slot": 8,
                            "departure_slot": 64,
                            "max_power_kw": 6.0,
                        },
                    ],
                },
                {
                    "id": "cust-home",
                    "token": "tok-cust-home",
                    "portfolio": "pf-retail-1",
                    "devices": [
                        {
                            "device_id": "base-home",
                            "kind": "fixed",
                            "profile": {"start_slot": 0, "values_kw": flat(0.5)},
                        },
                        {
                            "device_id": "washer",
                            "kind": "deferrable",
                            "power_kw": 2.0,
                            "duration_slots": 2,
                            "earliest_start": 8,
                            "deadline": 40,
                        },
                        {
                            "device_id": "heater",
                            "kind": "thermostatic_heater",
                            "rated_power_kw": 1.0,
                            "t_min_c": 19.0,
                            "t_max_c": 22.0,
                            "t0_c": 21.0,
                            "alpha_per_slot": 0.1,
                            "beta_c_per_kwh": 8.0,
                        },
                    ],
                },
            ],
        },
        "segments": [
            {"id": "seg-town", "capacity_kw": 40.0, "customers": ["cust-ev", "cust-home"]}
        ],
        "programmes": [
            {
                "id": "prog-flex",
                "manager": "mgr-a",
                "tariff_ct_per_kwh": tariff,
                "incentive_rate_ct_per_kwh": 40,
                "max_signals_per_day": 6,
                "description": "retail flexibility pool, evening-valley tariff",
            }
        ],
        "subscriptions": [
            {"customer": "cust-ev", "programme": "prog-flex"},
            {"customer": "cust-home", "programme": "prog-flex"},
        ],
        "scripted_requests": [
            {
                "at_slot": 5,
                "requester": "retail-1",
                "direction": "decrease",
                "scope": "pf-retail-1",
                "target": {"start_slot": 8, "values_kw": [1.5, 1.5]},
            },
            {
                "at_slot": 25,
                "requester": "retail-1",
                "direction": "decrease",
                "scope": "pf-retail-1",
                "target": {"start_slot": 48, "values_kw": [4.0, 4.0]},
            },
            {
                "at_slot": 40,
                "requester": "retail-1",
                "direction": "increase",
                "scope": "pf-retail-1",
                "target": {"start_slot": 44, "values_kw": [3.0]},
            },
        ],
        "scripted_overrides": [],
    }


def main():
    os.makedirs(OUT, exist_ok=True)
    for build in (grid_overload, retailer_arbitrage):
        scenario = build()
        path = os.path.join(OUT, f"{scenario['name']}.json")
        with open(path, "w") as f:
            json.dump(scenario, f, indent=1)
            f.write("\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
