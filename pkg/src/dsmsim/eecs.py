"""Per-customer energy controller.

Owns the committed schedule for every device on one site, computes the
baseline, answers flexibility queries, applies and overrides DSM signals,
and meters consumption. One controller per customer; independent across
customers. A signal response never rewrites slots that were already metered.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from . import devices as dv
from .core import Direction, LogicalTime, PowerProfile, TimeGrid


class SignalStatus(str, Enum):
    PENDING = "pending"
    AUTO_ACCEPTED = "auto_accepted"
    PARTIALLY_MET = "partially_met"
    OVERRIDDEN = "overridden"


class SignalNotFoundError(KeyError):
    pass


class SignalWindowElapsedError(RuntimeError):
    pass


@dataclass(frozen=True)
class DsmSignal:
    signal_id: str
    manager_id: str
    customer_id: str
    direction: Direction
    requested: PowerProfile
    incentive_rate_ct_per_kwh: int
    issued_at: LogicalTime

    def to_json_obj(self) -> dict:
        return {
            "signal_id": self.signal_id,
            "manager_id": self.manager_id,
            "customer_id": self.customer_id,
            "direction": self.direction.value,
            "requested": self.requested.to_json_obj(),
            "incentive_rate_ct_per_kwh": self.incentive_rate_ct_per_kwh,
            "issued_slot": self.issued_at.slot,
        }


@dataclass(frozen=True)
class Prefs:
    comfort_weight: float = 1.0
    auto_accept: bool = True


@dataclass
class SignalRecord:
    signal: DsmSignal
    status: SignalStatus
    planned_delta: PowerProfile
    snapshot_sched: dict
    snapshot_state: dict
    applied_slot: Optional[int] = None


@dataclass(frozen=True)
class MeterReading:
    slot: int
    per_device_mw: tuple  # ((device_id, mw), ...) sorted by id
    pv_mw: int
    net_mw: int

    @property
    def gross_mw(self) -> int:
        return sum(mw for _, mw in self.per_device_mw)

    def to_json_obj(self) -> dict:
        return {
            "slot": self.slot,
            "devices": {d: mw for d, mw in self.per_device_mw},
            "pv_mw": self.pv_mw,
            "net_mw": self.net_mw,
        }


@dataclass
class Eecs:
    grid: TimeGrid
    customer_id: str
    devices: list
    pv: PowerProfile
    prefs: Prefs
    tariff_ct_per_kwh: tuple
    outdoor_c: tuple
    sched: dict = field(default_factory=dict)
    dev_state: dict = field(default_factory=dict)
    records: dict = field(default_factory=dict)
    meter_log: list = field(default_factory=list)

    def __post_init__(self):
        # fixed loads are placed first (they cannot move), then id order
        self.devices = sorted(
            self.devices, key=lambda d: (not isinstance(d, dv.FixedLoad), d.device_id)
        )

    # -- scheduling ----------------------------------------------------

    def _ctx_for(self, dev_id: str, now_slot: int, sched=None) -> dv.SchedulingContext:
        sched = self.sched if sched is None else sched
        h = self.grid.horizon_slots
        residual = [-self.pv.value_at(t) for t in range(h)]
        for d in self.devices:
            if d.device_id == dev_id:
                continue
            placed = sched.get(d.device_id)
            if placed:
                for t in range(h):
                    residual[t] += placed[t]
        return dv.SchedulingContext(
            grid=self.grid,
            tariff_ct_per_kwh=self.tariff_ct_per_kwh,
            residual_mw=tuple(residual),
            outdoor_c=self.outdoor_c,
            now_slot=now_slot,
        )

    def compute_baseline(self) -> None:
        self.sched = {}
        self.dev_state = {}
        for d in self.devices:
            ctx = self._ctx_for(d.device_id, 0)
            sched, state = dv.baseline_schedule(d, ctx)
            self.sched[d.device_id] = sched
            self.dev_state[d.device_id] = state

    def gross_mw(self, slot: int, sched=None) -> int:
        sched = self.sched if sched is None else sched
        return sum(s[slot] for s in sched.values())

    def net_mw(self, slot: int) -> int:
        return self.gross_mw(slot) - self.pv.value_at(slot)

    def net_profile(self) -> list:
        return [self.net_mw(t) for t in range(self.grid.horizon_slots)]

    def _respond_all(self, window: range, direction: Direction, rate, now_slot: int):
        """Run every movable device's response in order, each seeing the
        previous ones' new placement. Returns (new scheds, new states)."""
        sched = {k: list(v) for k, v in self.sched.items()}
        state = dict(self.dev_state)
        for d in self.devices:
            if isinstance(d, dv.FixedLoad):
                continue
            ctx = self._ctx_for(d.device_id, now_slot, sched)
            new_sched, new_state = dv.respond(d, state[d.device_id], ctx, window, direction, rate)
            sched[d.device_id] = new_sched
            state[d.device_id] = new_state
        return sched, state

    def query_flexibility(self, window: range, direction: Direction, now_slot: int = 0) -> PowerProfile:
        """Per-slot power the site can shed (or add) in the window without
        violating any device constraint; jointly deliverable by construction
        because it is the shift an unbounded-incentive response would make."""
        if not self.sched:
            raise RuntimeError("baseline not computed")
        new_sched, _ = self._respond_all(window, direction, None, now_slot)
        vals = []
        for t in window:
            base = self.gross_mw(t)
            new = self.gross_mw(t, new_sched)
            vals.append(max(0, base - new) if direction is Direction.DECREASE else max(0, new - base))
        return PowerProfile(self.grid, window.start, tuple(vals)).trimmed()

    # -- signal lifecycle ----------------------------------------------

    def receive_signal(self, signal: DsmSignal) -> SignalRecord:
        rec = SignalRecord(
            signal=signal,
            status=SignalStatus.PENDING,
            planned_delta=PowerProfile.empty(self.grid),
            snapshot_sched={k: tuple(v) for k, v in self.sched.items()},
            snapshot_state=dict(self.dev_state),
        )
        self.records[signal.signal_id] = rec
        return rec

    def apply_signal(self, signal_id: str, now_slot: int) -> SignalRecord:
        rec = self._record(signal_id)
        if rec.status is not SignalStatus.PENDING:
            return rec
        sig = rec.signal
        # the settlement counterfactual: committed schedule right before applying
        rec.snapshot_sched = {k: tuple(v) for k, v in self.sched.items()}
        rec.snapshot_state = dict(self.dev_state)
        window = sig.requested.slots()
        new_sched, new_state = self._respond_all(window, sig.direction, sig.incentive_rate_ct_per_kwh, now_slot)
        self.sched = {k: list(v) for k, v in new_sched.items()}
        self.dev_state = new_state
        vals = []
        for t in window:
            base = sum(rec.snapshot_sched[d][t] for d in rec.snapshot_sched)
            new = self.gross_mw(t)
            vals.append(max(0, base - new) if sig.direction is Direction.DECREASE else max(0, new - base))
        rec.planned_delta = PowerProfile(self.grid, window.start, tuple(vals)).trimmed()
        rec.applied_slot = now_slot
        met_everywhere = rec.planned_delta.covers(sig.requested)
        rec.status = SignalStatus.AUTO_ACCEPTED if met_everywhere else SignalStatus.PARTIALLY_MET
        return rec

    def override_signal(self, signal_id: str, now_slot: int) -> SignalRecord:
        rec = self._record(signal_id)
        if rec.status is SignalStatus.OVERRIDDEN:
            return rec  # idempotent
        if self._window_metered(rec):
            raise SignalWindowElapsedError(signal_id)
        # past slots already ran; restoring the snapshot only changes the future
        # because signal application never edits slots before its now_slot.
        self.sched = {k: list(v) for k, v in rec.snapshot_sched.items()}
        self.dev_state = dict(rec.snapshot_state)
        rec.status = SignalStatus.OVERRIDDEN
        return rec

    def _window_metered(self, rec: SignalRecord) -> bool:
        return len(self.meter_log) >= rec.signal.requested.end_slot

    def _record(self, signal_id: str) -> SignalRecord:
        try:
            return self.records[signal_id]
        except KeyError:
            raise SignalNotFoundError(signal_id) from None

    # -- metering and settlement support ---------------------------------

    def meter_slot(self, slot: int) -> MeterReading:
        per_dev = tuple(sorted((d.device_id, self.sched[d.device_id][slot]) for d in self.devices))
        reading = MeterReading(
            slot=slot,
            per_device_mw=per_dev,
            pv_mw=self.pv.value_at(slot),
            net_mw=sum(mw for _, mw in per_dev) - self.pv.value_at(slot),
        )
        assert len(self.meter_log) == slot, "slots are metered exactly once, in order"
        self.meter_log.append(reading)
        return reading

    def delivered_profile(self, signal_id: str) -> tuple[PowerProfile, list]:
        """Measured shift vs. the signal's baseline snapshot, from metered
        slots only. Returns (profile, missing_slots)."""
        rec = self._record(signal_id)
        sig = rec.signal
        vals = []
        missing = []
        for t in sig.requested.slots():
            if t < len(self.meter_log):
                base = sum(rec.snapshot_sched[d][t] for d in rec.snapshot_sched)
                actual = self.meter_log[t].gross_mw
                d = base - actual if sig.direction is Direction.DECREASE else actual - base
                vals.append(max(0, d))
            else:
                vals.append(0)
                missing.append(t)
        profile = PowerProfile(self.grid, sig.requested.start_slot, tuple(vals)).trimmed()
        return profile, missing

    # -- invariant probes (tests, reports) --------------------------------

    def device_energy_mwmin(self, device_id: str) -> int:
        return sum(self.sched[device_id]) * self.grid.slot_duration_minutes

    def thermostat_traces(self) -> dict:
        out = {}
        for d in self.devices:
            if isinstance(d, dv.ThermostaticHeater):
                out[d.device_id] = dv.temperature_trace_of(
                    d, self.grid, self.outdoor_c, self.sched[d.device_id]
                )
        return out

    def schedule_json(self) -> dict:
        return {
            "customer_id": self.customer_id,
            "devices": {d.device_id: list(self.sched[d.device_id]) for d in self.devices},
            "pv_mw": [self.pv.value_at(t) for t in range(self.grid.horizon_slots)],
            "net_mw": self.net_profile(),
        }
