"""Appliance models and their local scheduling algorithms.

Four device kinds: deferrable runs (washer-style contiguous or interruptible
blocks), thermostatic heaters with a first-order thermal recurrence,
modulating EV chargers, and fixed loads. Each kind supports three questions:

  baseline   -- cheapest feasible placement under the site tariff
  respond    -- re-placement minimizing tariff cost minus incentive credit
                for a signal window (rate=None means "maximize the shift",
                which is how flexibility queries are answered)

Responses never touch slots before `now_slot` and never violate a device
constraint. All power arithmetic is integer milliwatts; objectives are exact
integers in (cent * mW * minute / kWh) units so comparisons cannot drift.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Union

from .core import Direction, PowerProfile, TimeGrid, mw_to_kw

# exhaustive subset search limit for thermostat responses
_THERMO_EXHAUSTIVE_LIMIT = 12

# tolerance for float temperature comparisons against the band
_T_EPS = 1e-9


class DeviceValidationError(ValueError):
    """Raised with the offending field named, e.g. 'deadline'."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


@dataclass(frozen=True)
class Deferrable:
    device_id: str
    power_mw: int
    duration_slots: int
    earliest_start: int
    deadline: int  # finish-by slot (exclusive): start + duration <= deadline
    interruptible: bool = False

    kind = "deferrable"


@dataclass(frozen=True)
class ThermostaticHeater:
    device_id: str
    rated_power_mw: int
    t_min_c: float
    t_max_c: float
    t0_c: float
    alpha_per_slot: float
    beta_c_per_kwh: float

    kind = "thermostatic_heater"

    def heat_gain_c(self, grid: TimeGrid) -> float:
        """Temperature rise contributed by one full-power slot."""
        return self.beta_c_per_kwh * mw_to_kw(self.rated_power_mw) * grid.slot_hours


@dataclass(frozen=True)
class EvCharger:
    device_id: str
    required_mwmin: int
    arrival_slot: int
    departure_slot: int
    max_power_mw: int

    kind = "ev_charger"


@dataclass(frozen=True)
class FixedLoad:
    device_id: str
    profile: PowerProfile

    kind = "fixed"


Device = Union[Deferrable, ThermostaticHeater, EvCharger, FixedLoad]


def validate_device(dev: Device, grid: TimeGrid) -> None:
    h = grid.horizon_slots
    if isinstance(dev, Deferrable):
        if dev.power_mw <= 0:
            raise DeviceValidationError("power_kw", "must be positive")
        if dev.duration_slots <= 0:
            raise DeviceValidationError("duration_slots", "must be positive")
        if dev.earliest_start < 0:
            raise DeviceValidationError("earliest_start", "must be >= 0")
        if dev.deadline > h:
            raise DeviceValidationError("deadline", f"exceeds horizon ({h})")
        if dev.earliest_start + dev.duration_slots > dev.deadline:
            raise DeviceValidationError(
                "deadline", "must allow earliest_start + duration_slots to finish"
            )
    elif isinstance(dev, ThermostaticHeater):
        if dev.rated_power_mw <= 0:
            raise DeviceValidationError("rated_power_kw", "must be positive")
        if not dev.t_min_c < dev.t_max_c:
            raise DeviceValidationError("t_min_c", "band requires t_min_c < t_max_c")
        if not dev.t_min_c <= dev.t0_c <= dev.t_max_c:
            raise DeviceValidationError("t0_c", "initial temperature outside band")
        if not 0 < dev.alpha_per_slot <= 1:
            raise DeviceValidationError("alpha_per_slot", "must be in (0, 1]")
        if dev.beta_c_per_kwh <= 0:
            raise DeviceValidationError("beta_c_per_kwh", "must be positive")
    elif isinstance(dev, EvCharger):
        if dev.max_power_mw <= 0:
            raise DeviceValidationError("max_power_kw", "must be positive")
        if not 0 <= dev.arrival_slot < dev.departure_slot <= h:
            raise DeviceValidationError("departure_slot", "need 0 <= arrival < departure <= horizon")
        if dev.required_mwmin < 0:
            raise DeviceValidationError("required_kwh", "must be >= 0")
        cap = dev.max_power_mw * grid.slot_duration_minutes * (dev.departure_slot - dev.arrival_slot)
        if dev.required_mwmin > cap:
            raise DeviceValidationError("required_kwh", "not reachable before departure")
        if dev.required_mwmin % grid.slot_duration_minutes:
            raise DeviceValidationError(
                "required_kwh", "must be an integer number of mW-slot allocations"
            )
    elif isinstance(dev, FixedLoad):
        if dev.profile.end_slot > h:
            raise DeviceValidationError("profile", "extends past horizon")
    else:  # pragma: no cover - parse layer guards this
        raise DeviceValidationError("kind", f"unknown device {dev!r}")


def validate_thermostat_adequacy(dev: ThermostaticHeater, grid: TimeGrid, outdoor_c) -> None:
    """Check the heater can hold the band against the given outdoor series.

    Without this, bang-bang control cannot promise T stays inside
    [t_min, t_max]; scenarios must only register adequately sized heaters.
    """
    g = dev.heat_gain_c(grid)
    t_out_min = min(outdoor_c)
    t_out_max = max(outdoor_c)
    if t_out_max > dev.t_max_c:
        raise DeviceValidationError(
            "outdoor_temperature_c", "exceeds t_max_c; heater cannot cool"
        )
    if g < dev.alpha_per_slot * (dev.t_min_c - t_out_min) - _T_EPS:
        raise DeviceValidationError(
            "rated_power_kw", "one-slot heat gain cannot recover the band bottom"
        )
    if g > dev.t_max_c - dev.t_min_c + _T_EPS:
        raise DeviceValidationError(
            "rated_power_kw", "one-slot heat gain overshoots the band top"
        )


# --------------------------------------------------------------------------
# scheduling context and cost arithmetic
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SchedulingContext:
    """Everything a device needs to place itself within a site.

    residual_mw is the rest of the site (other devices + fixed loads minus
    PV) per slot and may be negative; tariff cost applies to the positive
    part of the net load only, so spare PV absorbs load for free.
    """

    grid: TimeGrid
    tariff_ct_per_kwh: tuple[int, ...]
    residual_mw: tuple[int, ...]
    outdoor_c: tuple[float, ...]
    now_slot: int = 0


def incremental_cost_units(ctx: SchedulingContext, slot: int, add_mw: int) -> int:
    """Cost of adding load at a slot, in ct*mW*min/kWh units (exact)."""
    res = ctx.residual_mw[slot]
    before = max(0, res)
    after = max(0, res + add_mw)
    return ctx.tariff_ct_per_kwh[slot] * (after - before) * ctx.grid.slot_duration_minutes


def schedule_cost_units(ctx: SchedulingContext, schedule) -> int:
    return sum(
        incremental_cost_units(ctx, t, p) for t, p in enumerate(schedule) if p
    )


def delta_units(
    grid: TimeGrid,
    base,
    new,
    window: range,
    direction: Direction,
) -> int:
    """Window energy shifted relative to base, clamped per direction."""
    total = 0
    for t in window:
        if direction is Direction.DECREASE:
            total += max(0, base[t] - new[t])
        else:
            total += max(0, new[t] - base[t])
    return total * grid.slot_duration_minutes


def _deviations(base, new) -> int:
    return sum(1 for b, n in zip(base, new) if b != n)


def _objective_key(ctx, base, new, window, direction, rate):
    """Comparable key: finite rate minimizes cost - rate*shift; rate=None
    maximizes the shift first. Ties prefer baseline-like schedules; remaining
    ties go to the earliest candidate (callers enumerate ascending and keep
    the first strict minimum)."""
    cost = schedule_cost_units(ctx, new)
    shift = delta_units(ctx.grid, base, new, window, direction)
    if rate is None:
        head = (-shift, cost)
    else:
        head = (cost - rate * shift,)
    return head + (_deviations(base, new),)


# --------------------------------------------------------------------------
# deferrable
# --------------------------------------------------------------------------


def _deferrable_schedule(dev: Deferrable, grid: TimeGrid, occupied) -> list[int]:
    sched = [0] * grid.horizon_slots
    for t in occupied:
        sched[t] = dev.power_mw
    return sched


def _interruptible_pick(dev, ctx, past, window, direction, rate, base_occ):
    """Slot scores are independent for interruptible runs, so the optimum is
    the `remaining` cheapest slots under a per-slot score."""
    remaining = dev.duration_slots - len(past)
    lo = max(dev.earliest_start, ctx.now_slot)
    free = [t for t in range(lo, dev.deadline) if t not in past]
    if len(free) < remaining:
        return tuple(sorted(base_occ))
    m = ctx.grid.slot_duration_minutes
    win = set(window) if window is not None else set()
    base_set = set(base_occ)

    def score(t):
        inc = incremental_cost_units(ctx, t, dev.power_mw)
        if direction is None:
            return (inc, t)
        if direction is Direction.DECREASE:
            shift_loss = t in base_set and t in win  # occupying kills that slot's delta
        else:
            shift_loss = not (t in win and t not in base_set)
        if rate is None:
            return (1 if shift_loss else 0, inc, t)
        penalty = rate * dev.power_mw * m if shift_loss and direction is Direction.DECREASE else 0
        bonus = rate * dev.power_mw * m if not shift_loss and direction is Direction.INCREASE else 0
        return (inc + penalty - bonus, t)

    chosen = sorted(free, key=score)[:remaining]
    return tuple(sorted(past + chosen))


def _deferrable_starts(dev: Deferrable, ctx: SchedulingContext):
    lo = max(dev.earliest_start, ctx.now_slot)
    hi = dev.deadline - dev.duration_slots
    return [tuple(range(s, s + dev.duration_slots)) for s in range(lo, hi + 1)]


def _deferrable_baseline(dev: Deferrable, ctx: SchedulingContext):
    # min tariff cost, ties -> earliest start (candidate order is ascending)
    if dev.interruptible:
        best = _interruptible_pick(dev, ctx, [], None, None, None, ())
    else:
        best = None
        best_key = None
        for occ in _deferrable_starts(dev, ctx):
            sched = _deferrable_schedule(dev, ctx.grid, occ)
            key = (schedule_cost_units(ctx, sched), occ)
            if best_key is None or key < best_key:
                best, best_key = occ, key
    sched = _deferrable_schedule(dev, ctx.grid, best)
    return sched, best


def _deferrable_respond(dev, state, ctx, window, direction, rate):
    base = _deferrable_schedule(dev, ctx.grid, state)
    past = [t for t in state if t < ctx.now_slot]
    if past and not dev.interruptible:
        return base, state  # already running or done; cannot move
    if dev.interruptible:
        best_state = _interruptible_pick(dev, ctx, past, window, direction, rate, state)
        return _deferrable_schedule(dev, ctx.grid, best_state), best_state
    best_state = state
    best_key = _objective_key(ctx, base, base, window, direction, rate)
    for occ in _deferrable_starts(dev, ctx):
        sched = _deferrable_schedule(dev, ctx.grid, occ)
        key = _objective_key(ctx, base, sched, window, direction, rate)
        if key < best_key:
            best_state, best_key = occ, key
    return _deferrable_schedule(dev, ctx.grid, best_state), best_state


# --------------------------------------------------------------------------
# EV charger
# --------------------------------------------------------------------------


def _ev_tiers(ctx: SchedulingContext, slot: int, present_mw: int, cap_mw: int):
    """(cost_per_unit, capacity) tiers for adding power at a slot: spare PV
    first (free), then the tariff."""
    net = ctx.residual_mw[slot] + present_mw
    free = max(0, min(cap_mw, -net))
    tiers = []
    if free:
        tiers.append((0, free))
    if cap_mw - free > 0:
        tiers.append((ctx.tariff_ct_per_kwh[slot], cap_mw - free))
    return tiers


def _ev_baseline(dev: EvCharger, ctx: SchedulingContext):
    sched = [0] * ctx.grid.horizon_slots
    budget = dev.required_mwmin // ctx.grid.slot_duration_minutes  # total mW to place
    entries = []
    for t in range(dev.arrival_slot, dev.departure_slot):
        for cost, cap in _ev_tiers(ctx, t, 0, dev.max_power_mw):
            entries.append((cost, t, cap))
    entries.sort(key=lambda e: (e[0], e[1]))
    for cost, t, cap in entries:
        if budget <= 0:
            break
        take = min(cap, budget)
        sched[t] += take
        budget -= take
    return sched, tuple(sched)


def _ev_respond(dev, state, ctx, window, direction, rate):
    base = list(state)
    new = list(base)
    m = ctx.grid.slot_duration_minutes
    win = set(window)

    def movable_slots(in_window: bool):
        return [
            t
            for t in range(max(dev.arrival_slot, ctx.now_slot), dev.departure_slot)
            if (t in win) == in_window
        ]

    if direction is Direction.DECREASE:
        sources, sinks = movable_slots(True), movable_slots(False)
    else:
        sources, sinks = movable_slots(False), movable_slots(True)

    # insertion tiers over the sink slots, cheapest first
    sink_tiers = []
    for t in sinks:
        cap = dev.max_power_mw - new[t]
        for cost, tier_cap in _ev_tiers(ctx, t, new[t], cap):
            sink_tiers.append([cost, t, tier_cap])
    sink_tiers.sort(key=lambda e: (e[0], e[1]))

    for t in sources:  # slot-ascending removal keeps responses reproducible
        while new[t] > 0:
            # marginal saving of removing one unit from t
            net = ctx.residual_mw[t] + new[t]
            marg_saved = ctx.tariff_ct_per_kwh[t] if net > 0 else 0
            gain = marg_saved if rate is None else marg_saved + rate
            block = new[t] if net <= 0 else min(new[t], net)
            moved = False
            for tier in sink_tiers:
                cost, sink_slot, cap = tier
                if cap <= 0:
                    continue
                if rate is not None and gain <= cost:
                    break  # sinks are sorted; nothing cheaper remains
                amount = min(block, cap)
                new[t] -= amount
                new[sink_slot] += amount
                tier[2] -= amount
                moved = True
                break
            if not moved:
                break
    return new, tuple(new)


# --------------------------------------------------------------------------
# thermostatic heater
# --------------------------------------------------------------------------


def thermostat_trace(
    dev: ThermostaticHeater,
    grid: TimeGrid,
    outdoor_c,
    forced_off=frozenset(),
    forced_on=frozenset(),
):
    """Simulate hysteresis bang-bang control with forced overrides.

    Control: start heating when the projected next temperature would fall
    below t_min, keep heating until one more heated slot would overshoot
    t_max. Returns (schedule_mw, temps, in_band).

    temps has horizon+1 entries (temperature entering each slot).
    """
    g = dev.heat_gain_c(grid)
    temps = [dev.t0_c]
    sched = [0] * grid.horizon_slots
    heating = False
    ok = True
    t_cur = dev.t0_c
    for t in range(grid.horizon_slots):
        proj_off = t_cur + dev.alpha_per_slot * (outdoor_c[t] - t_cur)
        if t in forced_off:
            on = False
            heating = False
        elif t in forced_on:
            on = True
            heating = True
        elif heating:
            on = proj_off + g <= dev.t_max_c + _T_EPS
            heating = on
        else:
            on = proj_off < dev.t_min_c - _T_EPS
            heating = on
        t_cur = proj_off + (g if on else 0.0)
        sched[t] = dev.rated_power_mw if on else 0
        temps.append(t_cur)
        if not dev.t_min_c - _T_EPS <= t_cur <= dev.t_max_c + _T_EPS:
            ok = False
    return sched, temps, ok


def temperature_trace_of(dev: ThermostaticHeater, grid: TimeGrid, outdoor_c, schedule):
    """Temperature trajectory implied by an arbitrary committed schedule."""
    g = dev.heat_gain_c(grid)
    temps = [dev.t0_c]
    t_cur = dev.t0_c
    for t in range(grid.horizon_slots):
        t_cur = t_cur + dev.alpha_per_slot * (outdoor_c[t] - t_cur)
        if schedule[t]:
            t_cur += g * (schedule[t] / dev.rated_power_mw)
        temps.append(t_cur)
    return temps


def _thermo_baseline(dev: ThermostaticHeater, ctx: SchedulingContext):
    sched, _, _ = thermostat_trace(dev, ctx.grid, ctx.outdoor_c)
    return sched, (frozenset(), frozenset())


def _thermo_respond(dev, state, ctx, window, direction, rate):
    forced_off, forced_on = state
    base, _, _ = thermostat_trace(dev, ctx.grid, ctx.outdoor_c, forced_off, forced_on)
    if direction is Direction.DECREASE:
        candidates = [t for t in window if t >= ctx.now_slot and base[t] > 0 and t not in forced_off]
    else:
        candidates = [t for t in window if t >= ctx.now_slot and base[t] == 0 and t not in forced_on]

    def evaluate(extra):
        if direction is Direction.DECREASE:
            off, on = forced_off | extra, forced_on - extra
        else:
            off, on = forced_off - extra, forced_on | extra
        sched, _, ok = thermostat_trace(dev, ctx.grid, ctx.outdoor_c, off, on)
        if not ok:
            return None
        key = _objective_key(ctx, base, sched, window, direction, rate)
        return key + (tuple(sorted(extra)),), sched, (off, on)

    best = evaluate(frozenset())
    if len(candidates) <= _THERMO_EXHAUSTIVE_LIMIT:
        for r in range(1, len(candidates) + 1):
            for combo in itertools.combinations(candidates, r):
                cand = evaluate(frozenset(combo))
                if cand is not None and cand[0] < best[0]:
                    best = cand
    else:
        chosen: frozenset = frozenset()
        for t in candidates:
            cand = evaluate(chosen | {t})
            if cand is not None and cand[0] < best[0]:
                best = cand
                chosen = chosen | {t}
    _, sched, new_state = best
    return sched, new_state


# --------------------------------------------------------------------------
# dispatch table
# --------------------------------------------------------------------------


def baseline_schedule(dev: Device, ctx: SchedulingContext):
    """Return (schedule list over horizon, device state)."""
    if isinstance(dev, FixedLoad):
        sched = [dev.profile.value_at(t) for t in range(ctx.grid.horizon_slots)]
        return sched, None
    if isinstance(dev, Deferrable):
        return _deferrable_baseline(dev, ctx)
    if isinstance(dev, EvCharger):
        return _ev_baseline(dev, ctx)
    if isinstance(dev, ThermostaticHeater):
        return _thermo_baseline(dev, ctx)
    raise TypeError(f"unknown device {dev!r}")


def respond(dev: Device, state, ctx: SchedulingContext, window: range, direction: Direction, rate: Optional[int]):
    """Re-place a device for a signal window; rate=None maximizes the shift.

    Returns (schedule, new_state); never changes slots before ctx.now_slot.
    """
    if isinstance(dev, FixedLoad):
        sched = [dev.profile.value_at(t) for t in range(ctx.grid.horizon_slots)]
        return sched, None
    if isinstance(dev, Deferrable):
        return _deferrable_respond(dev, state, ctx, window, direction, rate)
    if isinstance(dev, EvCharger):
        return _ev_respond(dev, state, ctx, window, direction, rate)
    if isinstance(dev, ThermostaticHeater):
        return _thermo_respond(dev, state, ctx, window, direction, rate)
    raise TypeError(f"unknown device {dev!r}")


def schedule_of(dev: Device, state, ctx: SchedulingContext):
    if isinstance(dev, FixedLoad):
        return [dev.profile.value_at(t) for t in range(ctx.grid.horizon_slots)]
    if isinstance(dev, Deferrable):
        return _deferrable_schedule(dev, ctx.grid, state)
    if isinstance(dev, EvCharger):
        return list(state)
    if isinstance(dev, ThermostaticHeater):
        sched, _, _ = thermostat_trace(dev, ctx.grid, ctx.outdoor_c, *state)
        return sched
    raise TypeError(f"unknown device {dev!r}")
