"""Scenario files: schema, parsing, eager validation.

A scenario is one JSON document describing the time grid, actors, devices,
grid segments, programmes, exogenous series (exchange quotes, outdoor
temperature, PV) and scripted triggers/overrides. Every cross-reference and
series length is checked up front; errors name the offending field.
The full schema is documented in docs/scenario-schema.md.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from . import devices as dv
from .core import Direction, PowerProfile, TimeGrid, kw_to_mw, kwh_to_mwmin
from .manager import ManagerPolicy


class ScenarioError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class ActorDef:
    actor_id: str
    token: str


@dataclass(frozen=True)
class RetailerDef(ActorDef):
    portfolio: str = ""


@dataclass(frozen=True)
class ManagerDef(ActorDef):
    policy: ManagerPolicy = ManagerPolicy()


@dataclass(frozen=True)
class CustomerDef(ActorDef):
    portfolio: Optional[str] = None
    prefs_comfort_weight: float = 1.0
    prefs_auto_accept: bool = True
    pv: Optional[PowerProfile] = None
    devices: tuple = ()


@dataclass(frozen=True)
class SegmentDef:
    segment_id: str
    capacity_mw: int
    customers: tuple


@dataclass(frozen=True)
class ProgrammeDef:
    programme_id: str
    manager_id: str
    tariff_ct_per_kwh: tuple
    incentive_rate_ct_per_kwh: int
    max_signals_per_day: int
    description: str


@dataclass(frozen=True)
class ScriptedRequest:
    at_slot: int
    requester_id: str
    direction: Direction
    scope: str
    target: PowerProfile
    budget_cap_ct: Optional[int]


@dataclass(frozen=True)
class ScriptedOverride:
    at_slot: int
    customer_id: str


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    grid: TimeGrid
    default_tariff_ct_per_kwh: tuple
    exchange_quotes_ct_per_kwh: tuple
    outdoor_c: tuple
    exact_threshold: int
    grid_trigger_enabled: bool
    trigger_lookahead_slots: int
    grid_operators: tuple
    retailers: tuple
    managers: tuple
    customers: tuple
    segments: tuple
    programmes: tuple
    subscriptions: tuple  # (customer_id, programme_id) pairs
    scripted_requests: tuple
    scripted_overrides: tuple

    def segment_of(self, customer_id: str) -> Optional[str]:
        for seg in self.segments:
            if customer_id in seg.customers:
                return seg.segment_id
        return None

    def scope_members(self, scope: str) -> frozenset:
        for seg in self.segments:
            if seg.segment_id == scope:
                return frozenset(seg.customers)
        members = [c.actor_id for c in self.customers if c.portfolio == scope]
        return frozenset(members)


def _series(obj, length, path, kind=float):
    """A flat number or a per-slot list, expanded and length-checked."""
    if isinstance(obj, (int, float)) and not isinstance(obj, bool):
        return tuple([kind(obj)] * length)
    if isinstance(obj, list):
        if len(obj) < length:
            raise ScenarioError(path, f"series has {len(obj)} entries, horizon needs {length}")
        return tuple(kind(v) for v in obj[:length])
    raise ScenarioError(path, "expected a number or a per-slot list")


def _int_series(obj, length, path):
    out = _series(obj, length, path, kind=lambda v: int(round(v)))
    if any(v < 0 for v in out):
        raise ScenarioError(path, "values must be >= 0")
    return out


def _profile(obj, grid, path) -> PowerProfile:
    try:
        start = int(obj["start_slot"])
        values = obj["values_kw"]
    except (KeyError, TypeError) as e:
        raise ScenarioError(path, f"profile needs start_slot and values_kw ({e})") from None
    try:
        return PowerProfile.from_kw(grid, start, values)
    except ValueError as e:
        raise ScenarioError(path, str(e)) from None


def _device(obj, grid, path) -> dv.Device:
    kind = obj.get("kind")
    did = obj.get("device_id")
    if not did:
        raise ScenarioError(f"{path}.device_id", "missing")
    try:
        if kind == "deferrable":
            dev = dv.Deferrable(
                device_id=did,
                power_mw=kw_to_mw(float(obj["power_kw"])),
                duration_slots=int(obj["duration_slots"]),
                earliest_start=int(obj["earliest_start"]),
                deadline=int(obj["deadline"]),
                interruptible=bool(obj.get("interruptible", False)),
            )
        elif kind == "thermostatic_heater":
            dev = dv.ThermostaticHeater(
                device_id=did,
                rated_power_mw=kw_to_mw(float(obj["rated_power_kw"])),
                t_min_c=float(obj["t_min_c"]),
                t_max_c=float(obj["t_max_c"]),
                t0_c=float(obj["t0_c"]),
                alpha_per_slot=float(obj["alpha_per_slot"]),
                beta_c_per_kwh=float(obj["beta_c_per_kwh"]),
            )
        elif kind == "ev_charger":
            dev = dv.EvCharger(
                device_id=did,
                required_mwmin=kwh_to_mwmin(float(obj["required_kwh"])),
                arrival_slot=int(obj["arrival_slot"]),
                departure_slot=int(obj["departure_slot"]),
                max_power_mw=kw_to_mw(float(obj["max_power_kw"])),
            )
        elif kind == "fixed":
            dev = dv.FixedLoad(device_id=did, profile=_profile(obj["profile"], grid, f"{path}.profile"))
        else:
            raise ScenarioError(f"{path}.kind", f"unknown device kind {kind!r}")
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioError(path, f"bad device definition: {e}") from None
    try:
        dv.validate_device(dev, grid)
    except dv.DeviceValidationError as e:
        raise ScenarioError(f"{path}.{e.field}", str(e)) from None
    return dev


def parse_scenario(obj: dict, name_hint: str = "scenario") -> Scenario:
    grid_obj = obj.get("time_grid", {})
    try:
        grid = TimeGrid(
            int(grid_obj.get("slot_duration_minutes", 15)),
            int(grid_obj.get("horizon_slots", 96)),
        )
    except ValueError as e:
        raise ScenarioError("time_grid", str(e)) from None
    h = grid.horizon_slots

    name = str(obj.get("name", name_hint))
    seed = int(obj.get("seed", 0))
    default_tariff = _int_series(obj.get("default_tariff_ct_per_kwh", 30), h, "default_tariff_ct_per_kwh")
    quotes = _int_series(obj.get("exchange_quotes_ct_per_kwh", 200), h, "exchange_quotes_ct_per_kwh")
    outdoor = _series(obj.get("outdoor_temperature_c", 10.0), h, "outdoor_temperature_c")
    exact_threshold = int(obj.get("exact_threshold", 24))
    trigger = obj.get("grid_trigger", {})
    trigger_enabled = bool(trigger.get("enabled", True))
    lookahead = int(trigger.get("lookahead_slots", h))

    actors = obj.get("actors", {})
    seen_ids: set[str] = set()
    seen_tokens: set[str] = set()

    def check_actor(aid, token, path):
        if not aid:
            raise ScenarioError(f"{path}.id", "missing")
        if aid in seen_ids:
            raise ScenarioError(f"{path}.id", f"duplicate actor id {aid!r}")
        if not token:
            raise ScenarioError(f"{path}.token", "missing")
        if token in seen_tokens:
            raise ScenarioError(f"{path}.token", "duplicate token")
        seen_ids.add(aid)
        seen_tokens.add(token)

    grid_operators = []
    for i, g in enumerate(actors.get("grid_operators", [])):
        path = f"actors.grid_operators[{i}]"
        check_actor(g.get("id"), g.get("token"), path)
        grid_operators.append(ActorDef(g["id"], g["token"]))

    retailers = []
    for i, r in enumerate(actors.get("retailers", [])):
        path = f"actors.retailers[{i}]"
        check_actor(r.get("id"), r.get("token"), path)
        retailers.append(RetailerDef(r["id"], r["token"], str(r.get("portfolio", f"portfolio-{r['id']}"))))

    managers = []
    for i, m in enumerate(actors.get("managers", [])):
        path = f"actors.managers[{i}]"
        check_actor(m.get("id"), m.get("token"), path)
        try:
            policy = ManagerPolicy.from_json_obj(m.get("policy", {}))
        except (ValueError, ZeroDivisionError) as e:
            raise ScenarioError(f"{path}.policy", str(e)) from None
        if policy.margin_fraction < 0 or policy.max_offer_fraction <= 0 or policy.price_jitter_fraction < 0:
            raise ScenarioError(f"{path}.policy", "fractions must be non-negative, max_offer_fraction positive")
        managers.append(ManagerDef(m["id"], m["token"], policy))

    customers = []
    for i, c in enumerate(actors.get("customers", [])):
        path = f"actors.customers[{i}]"
        check_actor(c.get("id"), c.get("token"), path)
        pv = None
        if c.get("pv_kw") is not None:
            pv_series = _series(c["pv_kw"], h, f"{path}.pv_kw")
            pv = PowerProfile(grid, 0, tuple(kw_to_mw(v) for v in pv_series))
        prefs = c.get("prefs", {})
        devs = tuple(
            _device(d, grid, f"{path}.devices[{j}]") for j, d in enumerate(c.get("devices", []))
        )
        dev_ids = [d.device_id for d in devs]
        if len(dev_ids) != len(set(dev_ids)):
            raise ScenarioError(f"{path}.devices", "duplicate device_id")
        for d in devs:
            if isinstance(d, dv.ThermostaticHeater):
                try:
                    dv.validate_thermostat_adequacy(d, grid, outdoor)
                except dv.DeviceValidationError as e:
                    raise ScenarioError(f"{path}.devices({d.device_id}).{e.field}", str(e)) from None
        customers.append(
            CustomerDef(
                actor_id=c["id"],
                token=c["token"],
                portfolio=c.get("portfolio"),
                prefs_comfort_weight=float(prefs.get("comfort_weight", 1.0)),
                prefs_auto_accept=bool(prefs.get("auto_accept", True)),
                pv=pv,
                devices=devs,
            )
        )
    customer_ids = {c.actor_id for c in customers}

    segments = []
    seen_members: set[str] = set()
    for i, s in enumerate(obj.get("segments", [])):
        path = f"segments[{i}]"
        sid = s.get("id")
        if not sid:
            raise ScenarioError(f"{path}.id", "missing")
        cap = s.get("capacity_kw")
        if cap is None or float(cap) <= 0:
            raise ScenarioError(f"{path}.capacity_kw", "must be a positive number")
        members = s.get("customers", [])
        for j, cid in enumerate(members):
            if cid not in customer_ids:
                raise ScenarioError(f"{path}.customers[{j}]", f"unknown customer {cid!r}")
            if cid in seen_members:
                raise ScenarioError(f"{path}.customers[{j}]", f"customer {cid!r} already in another segment")
            seen_members.add(cid)
        segments.append(SegmentDef(sid, kw_to_mw(float(cap)), tuple(members)))

    manager_ids = {m.actor_id for m in managers}
    programmes = []
    for i, p in enumerate(obj.get("programmes", [])):
        path = f"programmes[{i}]"
        pid = p.get("id")
        if not pid:
            raise ScenarioError(f"{path}.id", "missing")
        if p.get("manager") not in manager_ids:
            raise ScenarioError(f"{path}.manager", f"unknown manager {p.get('manager')!r}")
        tariff = _int_series(p.get("tariff_ct_per_kwh", default_tariff[0]), h, f"{path}.tariff_ct_per_kwh")
        rate = int(p.get("incentive_rate_ct_per_kwh", 0))
        if rate < 0:
            raise ScenarioError(f"{path}.incentive_rate_ct_per_kwh", "must be >= 0")
        programmes.append(
            ProgrammeDef(
                programme_id=pid,
                manager_id=p["manager"],
                tariff_ct_per_kwh=tariff,
                incentive_rate_ct_per_kwh=rate,
                max_signals_per_day=int(p.get("max_signals_per_day", 8)),
                description=str(p.get("description", "")),
            )
        )
    programme_ids = {p.programme_id for p in programmes}

    subscriptions = []
    subscribed: set[str] = set()
    for i, s in enumerate(obj.get("subscriptions", [])):
        path = f"subscriptions[{i}]"
        cid, pid = s.get("customer"), s.get("programme")
        if cid not in customer_ids:
            raise ScenarioError(f"{path}.customer", f"unknown customer {cid!r}")
        if pid not in programme_ids:
            raise ScenarioError(f"{path}.programme", f"unknown programme {pid!r}")
        if cid in subscribed:
            raise ScenarioError(f"{path}.customer", f"customer {cid!r} subscribed twice")
        subscribed.add(cid)
        subscriptions.append((cid, pid))

    requester_ids = {a.actor_id for a in grid_operators} | {r.actor_id for r in retailers}
    scripted_requests = []
    for i, r in enumerate(obj.get("scripted_requests", [])):
        path = f"scripted_requests[{i}]"
        if r.get("requester") not in requester_ids:
            raise ScenarioError(f"{path}.requester", f"unknown requester {r.get('requester')!r}")
        direction = r.get("direction", "decrease")
        if direction not in ("decrease", "increase"):
            raise ScenarioError(f"{path}.direction", "must be 'decrease' or 'increase'")
        at_slot = int(r.get("at_slot", 0))
        if not 0 <= at_slot < h:
            raise ScenarioError(f"{path}.at_slot", "outside horizon")
        target = _profile(r.get("target", {}), grid, f"{path}.target")
        if target.is_empty():
            raise ScenarioError(f"{path}.target", "must be non-empty")
        if target.start_slot < at_slot:
            raise ScenarioError(f"{path}.target", "window starts before the request is issued")
        budget = r.get("budget_cap_ct")
        scripted_requests.append(
            ScriptedRequest(
                at_slot=at_slot,
                requester_id=r["requester"],
                direction=Direction(direction),
                scope=str(r.get("scope", "")),
                target=target,
                budget_cap_ct=None if budget is None else int(budget),
            )
        )

    scripted_overrides = []
    for i, o in enumerate(obj.get("scripted_overrides", [])):
        path = f"scripted_overrides[{i}]"
        if o.get("customer") not in customer_ids:
            raise ScenarioError(f"{path}.customer", f"unknown customer {o.get('customer')!r}")
        at_slot = int(o.get("at_slot", 0))
        if not 0 <= at_slot < h:
            raise ScenarioError(f"{path}.at_slot", "outside horizon")
        scripted_overrides.append(ScriptedOverride(at_slot, o["customer"]))

    return Scenario(
        name=name,
        seed=seed,
        grid=grid,
        default_tariff_ct_per_kwh=default_tariff,
        exchange_quotes_ct_per_kwh=quotes,
        outdoor_c=outdoor,
        exact_threshold=exact_threshold,
        grid_trigger_enabled=trigger_enabled,
        trigger_lookahead_slots=lookahead,
        grid_operators=tuple(grid_operators),
        retailers=tuple(retailers),
        managers=tuple(managers),
        customers=tuple(customers),
        segments=tuple(segments),
        programmes=tuple(programmes),
        subscriptions=tuple(subscriptions),
        scripted_requests=tuple(scripted_requests),
        scripted_overrides=tuple(scripted_overrides),
    )


def load_scenario(path: str) -> Scenario:
    with open(path) as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as e:
            raise ScenarioError("<file>", f"not valid JSON: {e}") from None
    import os

    return parse_scenario(obj, name_hint=os.path.splitext(os.path.basename(path))[0])
