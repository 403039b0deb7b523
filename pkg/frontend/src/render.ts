// HTML renderers: state in, markup string out. No business computation here
// beyond formatting; interactive elements carry data-action attributes the
// bootstrap wires up after each render.

import { escapeHtml, euros, kw, slotClock, slotsUntilElapsed, windowLabel } from "./format.js";
import type { CustomerState, OperatorState } from "./state.js";
import { overridable } from "./state.js";
import type { Programme, SignalCard } from "./types.js";

function statusBadge(status: string): string {
  return `<span class="badge badge-${status}">${escapeHtml(status.replace("_", " "))}</span>`;
}

export function renderProgrammeList(state: CustomerState): string {
  if (state.programmes.length === 0) {
    return `<p class="quiet">No programmes published yet.</p>`;
  }
  const active = state.subscription?.status === "active" ? state.subscription : null;
  const rows = state.programmes
    .map((p: Programme) => {
      const mine = active?.programme_id === p.programme_id;
      const button = mine
        ? `<button data-action="unsubscribe" data-subscription="${escapeHtml(active!.subscription_id)}">Unsubscribe</button>`
        : `<button data-action="subscribe" data-programme="${escapeHtml(p.programme_id)}"${active ? " disabled" : ""}>Subscribe</button>`;
      return `<tr${mine ? ' class="active-row"' : ""}>
        <td>${escapeHtml(p.programme_id)}${mine ? ' <span class="badge badge-active">Active</span>' : ""}</td>
        <td>${escapeHtml(p.manager_id)}</td>
        <td>${p.incentive_rate_ct_per_kwh} ct/kWh</td>
        <td>${p.max_signals_per_day}/day</td>
        <td>${escapeHtml(p.description)}</td>
        <td>${button}</td>
      </tr>`;
    })
    .join("");
  return `<table class="programmes">
    <thead><tr><th>Programme</th><th>Manager</th><th>Incentive</th><th>Signals</th><th></th><th></th></tr></thead>
    <tbody>${rows}</tbody></table>`;
}

export function renderSignalCard(card: SignalCard, state: CustomerState): string {
  const len = card.requested.values_mw.length;
  const peak = Math.max(0, ...card.requested.values_mw);
  const now = state.sim?.slot ?? 0;
  const remaining = slotsUntilElapsed(card.requested.start_slot, len, now);
  const canOverride = overridable(card, state.sim);
  const busy = state.overrideInFlight === card.signal_id;
  const countdown =
    remaining === 0
      ? "window elapsed"
      : now < card.requested.start_slot
        ? `starts ${slotClock(card.requested.start_slot)} (in ${card.requested.start_slot - now} slots)`
        : `${remaining} slot(s) remaining`;
  const overrideButton = canOverride
    ? `<button data-action="override" data-signal="${escapeHtml(card.signal_id)}"${busy ? " disabled" : ""}>${busy ? "Overriding…" : "Override"}</button>`
    : "";
  const credit =
    card.credited_ct !== null ? `<div class="credited">credited ${euros(card.credited_ct)}</div>` : "";
  return `<div class="card signal-card status-${card.status}" data-signal-card="${escapeHtml(card.signal_id)}">
    <div class="card-head"><strong>${escapeHtml(card.signal_id)}</strong> ${statusBadge(card.status)}</div>
    <div>${card.direction === "decrease" ? "Shed" : "Add"} up to ${kw(peak)} in ${windowLabel(card.requested.start_slot, len)}</div>
    <div>incentive ${card.incentive_rate_ct_per_kwh} ct/kWh · from ${escapeHtml(card.manager_id)}</div>
    <div class="countdown">${countdown}</div>
    ${credit}
    ${overrideButton}
  </div>`;
}

export function renderSignalFeed(state: CustomerState): string {
  const banner =
    state.streamStatus === "reconnecting"
      ? `<div class="banner">connection lost – reconnecting…</div>`
      : "";
  const error = state.inlineError
    ? `<div class="banner error">${escapeHtml(state.inlineError)}</div>`
    : "";
  if (state.signals.length === 0) {
    return `${banner}${error}<p class="quiet">No DSM signals yet – all quiet.</p>`;
  }
  return banner + error + state.signals.map((s) => renderSignalCard(s, state)).join("");
}

/** Per-device schedule bars; pure presentation of the committed plan. */
export function renderScheduleTimeline(state: CustomerState): string {
  const sched = state.schedule;
  if (!sched) return `<p class="quiet">schedule not loaded</p>`;
  const devices = Object.keys(sched.devices).sort();
  const horizon = sched.net_mw.length;
  const peak = Math.max(1, ...devices.map((d) => Math.max(...sched.devices[d])));
  const rows = devices
    .map((d) => {
      const cells = sched.devices[d]
        .map((mw, t) => {
          const h = mw > 0 ? Math.max(8, Math.round((mw / peak) * 28)) : 1;
          return `<div class="bar${mw > 0 ? " on" : ""}" style="height:${h}px" title="${slotClock(t)} ${kw(mw)}"></div>`;
        })
        .join("");
      return `<div class="lane"><span class="lane-label">${escapeHtml(d)}</span><div class="bars">${cells}</div></div>`;
    })
    .join("");
  return `<div class="timeline" data-horizon="${horizon}">${rows}</div>`;
}

export function renderCustomerView(state: CustomerState): string {
  const sim = state.sim;
  const clock = sim
    ? `slot ${sim.slot}/${sim.horizon_slots} (${slotClock(sim.slot)}) · ${sim.paused ? "override window open" : sim.finished ? "finished" : sim.phase}`
    : "connecting…";
  return `
  <section class="panel">
    <h2>Balance ${euros(state.balanceCt)} <small class="clock">${clock}</small></h2>
  </section>
  <section class="panel"><h2>DSM signals</h2>${renderSignalFeed(state)}</section>
  <section class="panel"><h2>Schedule</h2>${renderScheduleTimeline(state)}</section>
  <section class="panel"><h2>Programmes</h2>${renderProgrammeList(state)}</section>`;
}

// ---------------------------------------------------------------------------
// operator view
// ---------------------------------------------------------------------------

export function renderLoadChart(segment: OperatorState["segments"][number]): string {
  const horizon = segment.net_mw.length;
  const width = 480;
  const height = 120;
  const top = Math.max(segment.capacity_mw * 1.2, ...segment.net_mw, 1);
  const x = (t: number) => (t / Math.max(1, horizon - 1)) * width;
  const y = (mw: number) => height - (mw / top) * height;
  const points = segment.net_mw.map((mw, t) => `${x(t).toFixed(1)},${y(mw).toFixed(1)}`).join(" ");
  const capY = y(segment.capacity_mw).toFixed(1);
  const violations = segment.net_mw.filter((v) => v > segment.capacity_mw).length;
  return `<figure class="load-chart" data-segment="${escapeHtml(segment.segment_id)}">
    <figcaption>${escapeHtml(segment.segment_id)} · capacity ${kw(segment.capacity_mw)} · ${violations} violation slot(s)</figcaption>
    <svg viewBox="0 0 ${width} ${height}" preserveAspectRatio="none">
      <line class="capacity" x1="0" y1="${capY}" x2="${width}" y2="${capY}"></line>
      <polyline class="load" points="${points}"></polyline>
    </svg>
  </figure>`;
}

export function renderRequestTable(state: OperatorState): string {
  if (state.requests.length === 0) {
    return `<p class="quiet">No shift requests yet.</p>`;
  }
  const rows = state.requests
    .map((r) => {
      const clearing = r.clearing
        ? r.clearing.feasible
          ? `${euros(r.clearing.total_price_ct)} (${r.clearing.selected.length} offers, ${r.clearing.method})`
          : "infeasible"
        : "–";
      const channel = r.acceptance
        ? `${escapeHtml(r.acceptance.decision)}${r.acceptance.recorded_cost_ct !== null ? " @ " + euros(r.acceptance.recorded_cost_ct) : ""}`
        : "–";
      const settlement = r.settlement
        ? Object.entries(r.settlement.payouts_ct)
            .map(([m, ct]) => `${escapeHtml(m)}: ${euros(ct)}`)
            .join(", ") || "no payouts"
        : "–";
      return `<tr>
        <td>${escapeHtml(r.request_id)}</td>
        <td>${escapeHtml(r.requester_id)}</td>
        <td>${escapeHtml(r.direction)} @ ${escapeHtml(r.scope)}</td>
        <td>${statusBadge(r.state)}</td>
        <td>${clearing}</td>
        <td>${channel}</td>
        <td>${settlement}</td>
      </tr>`;
    })
    .join("");
  return `<table class="requests">
    <thead><tr><th>Request</th><th>From</th><th>What</th><th>State</th><th>Clearing</th><th>Channel</th><th>Settlement</th></tr></thead>
    <tbody>${rows}</tbody></table>`;
}

export function renderOperatorView(state: OperatorState): string {
  const sim = state.sim;
  const clock = sim
    ? `slot ${sim.slot}/${sim.horizon_slots} · ${sim.finished ? "finished" : sim.phase}${sim.paused ? " (paused)" : ""}`
    : "connecting…";
  const resume =
    sim && sim.paused
      ? `<button data-action="resume">Resume clock</button>`
      : "";
  const charts = state.segments.map(renderLoadChart).join("");
  return `
  <section class="panel"><h2>Grid <small class="clock">${clock}</small> ${resume}</h2>${charts}</section>
  <section class="panel"><h2>Shift requests</h2>${renderRequestTable(state)}</section>`;
}
