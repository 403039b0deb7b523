import { describe, expect, it } from "vitest";

import { euros, kw, slotClock, windowLabel } from "../src/format.js";
import {
  renderLoadChart,
  renderProgrammeList,
  renderRequestTable,
  renderSignalCard,
  renderSignalFeed,
} from "../src/render.js";
import { applyStreamEvent, initialCustomerState, type OperatorState } from "../src/state.js";
import type { SignalCard, SimState } from "../src/types.js";

const SIM: SimState = {
  run_id: "r",
  slot: 10,
  phase: "override",
  horizon_slots: 96,
  paused: true,
  finished: false,
  mode: "interactive",
};

function card(overrides: Partial<SignalCard> = {}): SignalCard {
  return {
    signal_id: "sig-1",
    manager_id: "m1",
    customer_id: "c1",
    direction: "decrease",
    requested: { start_slot: 40, values_mw: [2000000, 2000000] },
    incentive_rate_ct_per_kwh: 10,
    issued_slot: 5,
    status: "auto_accepted",
    planned_delta: { start_slot: 40, values_mw: [2000000, 2000000] },
    credited_ct: null,
    ...overrides,
  };
}

describe("formatting", () => {
  it("units render from integer wire values", () => {
    expect(kw(2000000)).toBe("2.0 kW");
    expect(kw(1800000)).toBe("1.80 kW");
    expect(euros(500)).toBe("€5.00");
    expect(euros(-7)).toBe("-€0.07");
    expect(slotClock(40)).toBe("10:00");
    expect(windowLabel(40, 2)).toBe("10:00–10:30");
  });
});

describe("signal cards", () => {
  it("live signal shows window, incentive, countdown, and an Override button", () => {
    const state = { ...initialCustomerState("c1"), sim: SIM };
    const html = renderSignalCard(card(), state);
    expect(html).toContain("Shed up to 2.0 kW");
    expect(html).toContain("10:00–10:30");
    expect(html).toContain("incentive 10 ct/kWh");
    expect(html).toContain("starts 10:00 (in 30 slots)");
    expect(html).toContain('data-action="override"');
    expect(html).not.toContain("disabled");
  });

  it("override button disables while the request is in flight", () => {
    const state = { ...initialCustomerState("c1"), sim: SIM, overrideInFlight: "sig-1" };
    const html = renderSignalCard(card(), state);
    expect(html).toContain("disabled");
    expect(html).toContain("Overriding");
  });

  it("overridden and elapsed cards lose the button", () => {
    const state = { ...initialCustomerState("c1"), sim: SIM };
    expect(renderSignalCard(card({ status: "overridden" }), state)).not.toContain(
      'data-action="override"',
    );
    const late = { ...initialCustomerState("c1"), sim: { ...SIM, slot: 42 } };
    expect(renderSignalCard(card(), late)).not.toContain('data-action="override"');
    expect(renderSignalCard(card(), late)).toContain("window elapsed");
  });

  it("settled card shows the credited amount", () => {
    const state = { ...initialCustomerState("c1"), sim: { ...SIM, slot: 42 } };
    const html = renderSignalCard(card({ credited_ct: 10 }), state);
    expect(html).toContain("credited €0.10");
  });

  it("feed is quiet without signals and shows a reconnect banner on drops", () => {
    const state = initialCustomerState("c1");
    expect(renderSignalFeed(state)).toContain("all quiet");
    const dropped = { ...state, streamStatus: "reconnecting" as const };
    expect(renderSignalFeed(dropped)).toContain("reconnecting");
  });

  it("a freshly streamed dispatch renders as a card immediately", () => {
    let state = initialCustomerState("c1");
    state = applyStreamEvent(state, {
      topic: "signals.c1",
      seq: 1,
      t_slot: 5,
      phase: "dispatch",
      publisher: "m1",
      type: "dsm_signal",
      payload: card() as unknown as Record<string, unknown>,
    });
    const html = renderSignalFeed({ ...state, sim: SIM });
    expect(html).toContain("sig-1");
    expect(html).toContain("signal-card");
  });

  it("inline errors escape markup from the server", () => {
    const state = { ...initialCustomerState("c1"), inlineError: "<script>alert(1)</script>" };
    const html = renderSignalFeed(state);
    expect(html).not.toContain("<script>alert");
    expect(html).toContain("&lt;script&gt;");
  });
});

describe("programme list", () => {
  it("subscribe buttons flip to unsubscribe on the active row", () => {
    const base = initialCustomerState("c1");
    const programmes = [
      {
        programme_id: "p1",
        manager_id: "m1",
        tariff_ct_per_kwh: [30],
        incentive_rate_ct_per_kwh: 10,
        max_signals_per_day: 4,
        description: "peak shaving",
      },
      {
        programme_id: "p2",
        manager_id: "m2",
        tariff_ct_per_kwh: [30],
        incentive_rate_ct_per_kwh: 12,
        max_signals_per_day: 4,
        description: "",
      },
    ];
    const unsubscribed = renderProgrammeList({ ...base, programmes });
    expect(unsubscribed.match(/data-action="subscribe"/g)).toHaveLength(2);
    const subscribed = renderProgrammeList({
      ...base,
      programmes,
      subscription: {
        subscription_id: "sub-1",
        customer_id: "c1",
        programme_id: "p1",
        start_slot: 0,
        status: "active",
      },
    });
    expect(subscribed).toContain('data-action="unsubscribe"');
    expect(subscribed).toContain("badge-active");
    // the other programme's subscribe button is disabled while one is active
    expect(subscribed).toContain('data-programme="p2" disabled');
  });
});

describe("operator view", () => {
  it("load chart draws the capacity line and counts violation slots", () => {
    const html = renderLoadChart({
      segment_id: "seg-1",
      capacity_mw: 50000000,
      net_mw: [44000000, 56000000, 44000000],
      metered_through_slot: 3,
    });
    expect(html).toContain("seg-1");
    expect(html).toContain("1 violation slot(s)");
    expect(html).toContain("polyline");
    expect(html).toContain('class="capacity"');
  });

  it("request table shows state, clearing, channel and settlement", () => {
    const state: OperatorState = {
      segments: [],
      sim: null,
      streamStatus: "open",
      requests: [
        {
          request_id: "req-0001",
          requester_id: "grid-op",
          requester_role: "grid_operator",
          direction: "decrease",
          scope: "seg-1",
          target: { start_slot: 40, values_mw: [6000000] },
          state: "settled",
          clearing: { selected: ["off-1", "off-2"], total_price_ct: 21, feasible: true, method: "exact" },
          acceptance: {
            decision: "accepted_offers",
            clearing_cost_ct: 21,
            exchange_cost_ct: null,
            recorded_cost_ct: 21,
          },
          settlement: { payouts_ct: { "mgr-a": 13 }, fulfillment_ppm: { "mgr-a": 1000000 } },
        },
      ],
    };
    const html = renderRequestTable(state);
    expect(html).toContain("req-0001");
    expect(html).toContain("badge-settled");
    expect(html).toContain("€0.21 (2 offers, exact)");
    expect(html).toContain("accepted_offers @ €0.21");
    expect(html).toContain("mgr-a: €0.13");
  });
});
