"""Deterministic discrete-time harness.

One run wires identity, broker, both marketplaces, manager agents and EECS
controllers from a scenario, then advances the slot clock through a fixed
phase sequence:

  exogenous -> triggers -> bidding -> clearing -> dispatch -> scheduling
  -> override -> metering -> settlement

Everything iterates in lexicographic id order and all randomness flows from
the run seed, so two batch runs of one scenario produce byte-identical event
logs. Interactive mode opens a gate during the override phase through which
a console can inject overrides before physics (metering) happens.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Optional

from . import metrics as metrics_mod
from .b2b import B2BMarket, RequestState
from .b2c import B2CMarket, Programme
from .core import Direction, LogicalTime, PowerProfile
from .eecs import DsmSignal, Eecs, Prefs, SignalStatus
from .manager import DsmManagerAgent, derived_rng
from .platform import (
    Broker,
    DeviceRegistry,
    Identity,
    Principal,
    Role,
    RunRegistry,
)
from .scenario import Scenario

ENGINE_ACTOR = "sim"


@dataclass
class Clock:
    slot: int = 0
    phase: str = "setup"

    def now(self) -> LogicalTime:
        return LogicalTime(self.slot, self.phase)


class Simulation:
    """A single scenario run. `override_gate`, when set, is called once per
    slot during the override phase (interactive mode's injection point)."""

    def __init__(
        self,
        scenario: Scenario,
        seed: Optional[int] = None,
        override_gate: Optional[Callable[["Simulation"], None]] = None,
        run_registry: Optional[RunRegistry] = None,
    ):
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.run_id = f"{scenario.name}-seed{self.seed}"
        self.grid = scenario.grid
        self.clock = Clock()
        self.broker = Broker(self.clock.now)
        self.identity = Identity()
        self.lock = threading.RLock()  # serializes API calls against the clock loop
        self._override_gate = override_gate
        self.finished = False
        self.metrics: Optional[dict] = None

        (run_registry or RunRegistry()).register(self.run_id, self.broker)

        self.engine = Principal(ENGINE_ACTOR, Role.ADMIN)
        self.identity.register(f"internal:{ENGINE_ACTOR}", self.engine)
        self.principals: dict[str, Principal] = {ENGINE_ACTOR: self.engine}
        for rec, role in (
            (scenario.grid_operators, Role.GRID_OPERATOR),
            (scenario.retailers, Role.RETAILER),
            (scenario.managers, Role.DSM_MANAGER),
            (scenario.customers, Role.CUSTOMER),
        ):
            for actor in rec:
                p = Principal(actor.actor_id, role)
                self.identity.register(actor.token, p)
                self.principals[actor.actor_id] = p

        self.b2c = B2CMarket(self.broker, self.engine, self.grid.slots_per_day)
        self.b2b = B2BMarket(
            self.broker,
            self.engine,
            scenario.exchange_quotes_ct_per_kwh,
            scenario.exact_threshold,
        )
        self.registry = DeviceRegistry(self.grid)

        # queues for API-injected market actions (drained in their phases)
        self._queued_requests: list[dict] = []
        self._queued_offers: list[dict] = []

        self._setup()

    # -- construction -------------------------------------------------------

    def _setup(self) -> None:
        sc = self.scenario
        self.broker.publish(
            self.engine,
            "run.meta",
            "run_started",
            {
                "run_id": self.run_id,
                "scenario": sc.name,
                "seed": self.seed,
                "slot_duration_minutes": self.grid.slot_duration_minutes,
                "horizon_slots": self.grid.horizon_slots,
                "segments": [
                    {
                        "segment_id": s.segment_id,
                        "capacity_mw": s.capacity_mw,
                        "customers": list(s.customers),
                    }
                    for s in sc.segments
                ],
                "actors": {aid: p.role.value for aid, p in sorted(self.principals.items())},
            },
        )

        for p in sc.programmes:
            self.b2c.publish_programme(
                self.principals[p.manager_id],
                Programme(
                    programme_id=p.programme_id,
                    manager_id=p.manager_id,
                    tariff_ct_per_kwh=p.tariff_ct_per_kwh,
                    incentive_rate_ct_per_kwh=p.incentive_rate_ct_per_kwh,
                    max_signals_per_day=p.max_signals_per_day,
                    description=p.description,
                ),
            )
        for cid, pid in sc.subscriptions:
            self.b2c.subscribe(self.principals[cid], pid, start_slot=0)

        self.eecs: dict[str, Eecs] = {}
        self._signal_subs = {}
        for c in sorted(sc.customers, key=lambda c: c.actor_id):
            for dev in c.devices:
                self.registry.register(c.actor_id, dev)
            programme = self.b2c.programme_of(c.actor_id)
            tariff = programme.tariff_ct_per_kwh if programme else sc.default_tariff_ct_per_kwh
            site = Eecs(
                grid=self.grid,
                customer_id=c.actor_id,
                devices=[r.device for r in self.registry.for_customer(c.actor_id)],
                pv=c.pv or PowerProfile.empty(self.grid),
                prefs=Prefs(c.prefs_comfort_weight, c.prefs_auto_accept),
                tariff_ct_per_kwh=tariff,
                outdoor_c=sc.outdoor_c,
            )
            site.compute_baseline()
            self.eecs[c.actor_id] = site
            self._signal_subs[c.actor_id] = self.broker.subscribe(
                self.principals[c.actor_id], f"signals.{c.actor_id}"
            )

        self.managers: dict[str, DsmManagerAgent] = {}
        self._request_subs: dict[str, list] = {}
        for m in sorted(sc.managers, key=lambda m: m.actor_id):
            agent = DsmManagerAgent(
                principal=self.principals[m.actor_id],
                policy=m.policy,
                b2c=self.b2c,
                b2b=self.b2b,
                eecs_by_customer=self.eecs,
                scope_members=sc.scope_members,
                rng=derived_rng(self.seed, m.actor_id),
                broker=self.broker,
            )
            self.managers[m.actor_id] = agent
            scopes = sorted(
                {s.segment_id for s in sc.segments}
                | {r.portfolio for r in sc.retailers}
                | {c.portfolio for c in sc.customers if c.portfolio}
            )
            self._request_subs[m.actor_id] = [
                self.broker.subscribe(agent.principal, f"requests.{scope}") for scope in scopes
            ]

        # grid-overload dedupe: (segment, slot) pairs already requested
        self._requested_overloads: set[tuple[str, int]] = set()
        # requests awaiting dispatch-side bookkeeping: rid -> window end slot
        self._live_requests: dict[str, int] = {}
        self._pending_signals: dict[str, list] = {cid: [] for cid in self.eecs}

    # -- public surface (API layer calls these under self.lock) --------------

    def queue_request(self, payload: dict) -> str:
        with self.lock:
            self._request_counter = getattr(self, "_request_counter", 0) + 1
            payload = dict(payload)
            payload["request_id"] = f"api-req-{self._request_counter:04d}"
            self._queued_requests.append(payload)
            return payload["request_id"]

    def queue_offer(self, payload: dict) -> None:
        with self.lock:
            self._queued_offers.append(dict(payload))

    def override_now(self, customer_id: str, signal_id: str):
        """Valid only while the override gate holds the clock in phase 7."""
        if self.clock.phase != "override":
            raise RuntimeError("overrides are accepted during the override phase only")
        site = self.eecs[customer_id]
        rec = site.override_signal(signal_id, self.clock.slot)
        self._publish_response(customer_id, rec)
        return rec

    def segment_net_mw(self, segment_id: str) -> list:
        seg = next(s for s in self.scenario.segments if s.segment_id == segment_id)
        out = []
        for t in range(self.grid.horizon_slots):
            out.append(sum(self.eecs[cid].net_mw(t) for cid in seg.customers))
        return out

    # -- phase bodies ----------------------------------------------------------

    def _phase(self, name: str) -> None:
        self.clock.phase = name

    def _do_triggers(self) -> None:
        sc = self.scenario
        slot = self.clock.slot
        if sc.grid_trigger_enabled and sc.grid_operators:
            operator = self.principals[sc.grid_operators[0].actor_id]
            horizon_end = min(self.grid.horizon_slots, slot + sc.trigger_lookahead_slots + 1)
            for seg in sc.segments:
                load = [
                    sum(self.eecs[cid].net_mw(t) for cid in seg.customers)
                    for t in range(self.grid.horizon_slots)
                ]
                overloaded = [
                    t
                    for t in range(slot, horizon_end)
                    if load[t] > seg.capacity_mw and (seg.segment_id, t) not in self._requested_overloads
                ]
                if not overloaded:
                    continue
                lo, hi = min(overloaded), max(overloaded)
                values = tuple(max(0, load[t] - seg.capacity_mw) for t in range(lo, hi + 1))
                target = PowerProfile(self.grid, lo, values).trimmed()
                for t in overloaded:
                    self._requested_overloads.add((seg.segment_id, t))
                req = self.b2b.submit_request(
                    operator,
                    Direction.DECREASE,
                    seg.segment_id,
                    target,
                    bid_deadline_slot=slot,
                    current_slot=slot,
                )
                self._live_requests[req.request_id] = target.end_slot
        for scripted in sc.scripted_requests:
            if scripted.at_slot != slot:
                continue
            req = self.b2b.submit_request(
                self.principals[scripted.requester_id],
                scripted.direction,
                scripted.scope,
                scripted.target,
                bid_deadline_slot=slot,
                current_slot=slot,
                budget_cap_ct=scripted.budget_cap_ct,
            )
            self._live_requests[req.request_id] = scripted.target.end_slot
        for payload in self._queued_requests:
            req = self.b2b.submit_request(
                payload["principal"],
                payload["direction"],
                payload["scope"],
                payload["target"],
                bid_deadline_slot=slot,
                current_slot=slot,
                budget_cap_ct=payload.get("budget_cap_ct"),
                request_id=payload.get("request_id"),
            )
            self._live_requests[req.request_id] = payload["target"].end_slot
        self._queued_requests.clear()

    def _do_bidding(self) -> None:
        slot = self.clock.slot
        for mid in sorted(self.managers):
            agent = self.managers[mid]
            for sub in self._request_subs[mid]:
                for event in self.broker.poll(sub):
                    req = self.b2b.get(event.payload["request_id"])
                    if req.state is RequestState.BIDDING and req.bid_deadline_slot >= slot:
                        agent.bid_on(req, slot)
        for payload in self._queued_offers:
            self.b2b.place_offer(
                payload["principal"],
                payload["request_id"],
                payload["supply"],
                payload["price_ct"],
                current_slot=slot,
            )
        self._queued_offers.clear()

    def _do_clearing(self) -> None:
        slot = self.clock.slot
        for req in self.b2b.all_requests():
            if req.state is RequestState.BIDDING and req.bid_deadline_slot <= slot:
                self.b2b.clear_request(req.request_id, slot)
                self.b2b.decide_acceptance(req.request_id)

    def _do_dispatch(self) -> None:
        now = self.clock.now()
        for req in self.b2b.all_requests():
            if req.state is not RequestState.ACCEPTED_OFFERS:
                continue
            winning_managers = sorted(
                {
                    o.manager_id
                    for o in self.b2b.offers_for(req.request_id)
                    if o.offer_id in req.clearing_result.selected
                }
            )
            for mid in winning_managers:
                agent = self.managers.get(mid)
                if agent is None:
                    # externally placed offer without an in-process agent: it
                    # cannot dispatch, so it simply earns nothing at settlement
                    self.broker.publish(
                        self.engine,
                        "run.meta",
                        "unmanaged_offer_warning",
                        {"request_id": req.request_id, "manager_id": mid},
                    )
                    continue
                offers = [
                    o
                    for o in self.b2b.offers_for(req.request_id)
                    if o.manager_id == mid and o.offer_id in req.clearing_result.selected
                ]
                for offer in offers:
                    agent.dispatch_signals(req, offer, now)
            self.b2b.mark_dispatched(req.request_id)

    def _do_scheduling(self) -> None:
        slot = self.clock.slot
        for cid in sorted(self.eecs):
            site = self.eecs[cid]
            for event in self.broker.poll(self._signal_subs[cid]):
                payload = event.payload
                signal = DsmSignal(
                    signal_id=payload["signal_id"],
                    manager_id=payload["manager_id"],
                    customer_id=payload["customer_id"],
                    direction=Direction(payload["direction"]),
                    requested=PowerProfile.from_json_obj(self.grid, payload["requested"]),
                    incentive_rate_ct_per_kwh=payload["incentive_rate_ct_per_kwh"],
                    issued_at=LogicalTime(payload["issued_slot"], "dispatch"),
                )
                programme = self.b2c.programme_of(cid)
                if programme is None or programme.manager_id != signal.manager_id:
                    # only the contracted manager may steer this site
                    self.broker.publish(
                        self.principals[cid],
                        f"responses.{cid}",
                        "signal_rejected",
                        {"signal_id": signal.signal_id, "reason": "no active contract with sender"},
                    )
                    continue
                site.receive_signal(signal)
                if site.prefs.auto_accept:
                    rec = site.apply_signal(signal.signal_id, slot)
                    self._publish_response(cid, rec)
                else:
                    self._pending_signals[cid].append(signal.signal_id)

    def _do_override(self) -> None:
        # scripted vetoes run under the lock; the interactive gate then waits
        # without it so console handlers can inject their own
        slot = self.clock.slot
        with self.lock:
            for scripted in self.scenario.scripted_overrides:
                if scripted.at_slot != slot:
                    continue
                site = self.eecs[scripted.customer_id]
                for sid in sorted(site.records):
                    rec = site.records[sid]
                    if rec.status is SignalStatus.OVERRIDDEN:
                        continue
                    if rec.signal.requested.end_slot <= len(site.meter_log):
                        continue  # window elapsed
                    rec = site.override_signal(sid, slot)
                    self._publish_response(scripted.customer_id, rec)
        if self._override_gate is not None:
            self._override_gate(self)
        # signals the human did not veto apply now, before physics
        with self.lock:
            for cid in sorted(self._pending_signals):
                site = self.eecs[cid]
                for sid in self._pending_signals[cid]:
                    if site.records[sid].status is SignalStatus.PENDING:
                        rec = site.apply_signal(sid, slot)
                        self._publish_response(cid, rec)
                self._pending_signals[cid] = []

    def _publish_response(self, customer_id: str, rec) -> None:
        self.broker.publish(
            self.principals[customer_id],
            f"responses.{customer_id}",
            "signal_response",
            {
                "signal_id": rec.signal.signal_id,
                "customer_id": customer_id,
                "manager_id": rec.signal.manager_id,
                "status": rec.status.value,
                "planned_delta": rec.planned_delta.to_json_obj(),
            },
        )

    def _do_metering(self) -> None:
        slot = self.clock.slot
        for cid in sorted(self.eecs):
            reading = self.eecs[cid].meter_slot(slot)
            self.broker.publish(
                self.principals[cid], f"telemetry.{cid}", "meter_reading", reading.to_json_obj()
            )

    def _do_settlement(self) -> None:
        slot = self.clock.slot
        for req in self.b2b.all_requests():
            if req.state is not RequestState.DISPATCHED:
                continue
            if self._live_requests.get(req.request_id, 0) - 1 != slot:
                continue
            delivered = {}
            credits = []
            for mid in sorted(self.managers):
                agent = self.managers[mid]
                if req.request_id not in agent.dispatched:
                    continue
                profile, per_signal, warnings = agent.report_fulfillment(req.request_id)
                for w in warnings:
                    self.broker.publish(agent.principal, "run.meta", "meter_gap_warning", w)
                if not profile.is_empty():
                    delivered[mid] = profile
                for sig, energy in per_signal:
                    credits.append(
                        self.b2c.credit_incentive(
                            sig.signal_id, sig.customer_id, energy, sig.incentive_rate_ct_per_kwh
                        )
                    )
            self.b2b.settle_request(req.request_id, delivered, tuple(credits))

    # -- clock loop -----------------------------------------------------------

    PHASE_BODIES = (
        ("exogenous", lambda self: None),
        ("triggers", _do_triggers),
        ("bidding", _do_bidding),
        ("clearing", _do_clearing),
        ("dispatch", _do_dispatch),
        ("scheduling", _do_scheduling),
        ("override", _do_override),
        ("metering", _do_metering),
        ("settlement", _do_settlement),
    )

    def step_slot(self) -> None:
        if self.clock.slot >= self.grid.horizon_slots:
            raise RuntimeError("horizon reached")
        for name, body in self.PHASE_BODIES:
            if name == "override":
                with self.lock:
                    self._phase(name)
                body(self)  # manages the lock itself around the gate
            else:
                with self.lock:
                    self._phase(name)
                    body(self)
        with self.lock:
            self.clock.slot += 1
            self.clock.phase = "exogenous"

    def run(self) -> dict:
        while self.clock.slot < self.grid.horizon_slots:
            self.step_slot()
        with self.lock:
            self.finished = True
            self.metrics = metrics_mod.compute_metrics(
                [e.to_json_obj() for e in self.broker.log_events()]
            )
        return self.metrics

    def export_log_lines(self) -> list:
        return self.broker.export_lines()
