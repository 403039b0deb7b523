"""Local equivalents of the hosted-platform enablers.

Identity: static bearer tokens mapped to role-carrying principals.
Pub/sub: an in-process broker with per-topic ACLs, strictly increasing
sequence numbers, cursor-based subscriptions, and a global append-only log
that exports deterministically. Device registry: capability descriptors
validated at registration. The broker interface is deliberately narrow so a
networked implementation could sit behind it.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from . import devices as dv
from .core import LogicalTime, TimeGrid


class Role(str, Enum):
    CUSTOMER = "customer"
    DSM_MANAGER = "dsm_manager"
    RETAILER = "retailer"
    GRID_OPERATOR = "grid_operator"
    ADMIN = "admin"


class AuthenticationError(PermissionError):
    pass


class AccessError(PermissionError):
    pass


class TopicError(ValueError):
    pass


class NotFoundError(KeyError):
    pass


@dataclass(frozen=True)
class Principal:
    actor_id: str
    role: Role


@dataclass(frozen=True)
class Event:
    topic: str
    seq: int
    time: LogicalTime
    publisher: str
    type: str
    payload: dict

    def to_json_obj(self) -> dict:
        return {
            "topic": self.topic,
            "seq": self.seq,
            "t_slot": self.time.slot,
            "phase": self.time.phase,
            "publisher": self.publisher,
            "type": self.type,
            "payload": self.payload,
        }


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# Topic namespace. `own` marks roles restricted to the topic ending in their
# own actor id (e.g. customers only reach signals.<their id>).
_ANY = frozenset(Role)


@dataclass(frozen=True)
class TopicSpec:
    prefix: str  # "signals." style prefix, or the full name for plain topics
    suffixed: bool
    publish: frozenset
    publish_own: frozenset
    subscribe: frozenset
    subscribe_own: frozenset


def _spec(prefix, publish, subscribe, publish_own=(), subscribe_own=(), suffixed=False):
    return TopicSpec(
        prefix,
        suffixed,
        frozenset(publish),
        frozenset(publish_own),
        frozenset(subscribe),
        frozenset(subscribe_own),
    )


TOPIC_SPECS = (
    _spec("run.meta", {Role.ADMIN, Role.DSM_MANAGER}, _ANY),
    _spec("market.programmes", {Role.DSM_MANAGER}, _ANY),
    _spec("market.subscriptions", {Role.CUSTOMER}, {Role.DSM_MANAGER, Role.ADMIN}),
    _spec("market.clearings", {Role.ADMIN}, {Role.RETAILER, Role.GRID_OPERATOR, Role.DSM_MANAGER, Role.ADMIN}),
    _spec("market.settlements", {Role.ADMIN}, {Role.RETAILER, Role.GRID_OPERATOR, Role.DSM_MANAGER, Role.ADMIN}),
    _spec("requests.", {Role.RETAILER, Role.GRID_OPERATOR}, {Role.DSM_MANAGER, Role.ADMIN}, suffixed=True),
    _spec(
        "signals.",
        {Role.DSM_MANAGER},
        {Role.DSM_MANAGER, Role.ADMIN, Role.CUSTOMER},
        subscribe_own={Role.CUSTOMER},
        suffixed=True,
    ),
    _spec(
        "responses.",
        {Role.CUSTOMER},
        {Role.DSM_MANAGER, Role.ADMIN, Role.CUSTOMER},
        publish_own={Role.CUSTOMER},
        subscribe_own={Role.CUSTOMER},
        suffixed=True,
    ),
    _spec(
        "telemetry.",
        {Role.CUSTOMER},
        {Role.DSM_MANAGER, Role.GRID_OPERATOR, Role.ADMIN, Role.CUSTOMER},
        publish_own={Role.CUSTOMER},
        subscribe_own={Role.CUSTOMER},
        suffixed=True,
    ),
    _spec(
        "credits.",
        {Role.ADMIN},
        {Role.DSM_MANAGER, Role.ADMIN, Role.CUSTOMER},
        subscribe_own={Role.CUSTOMER},
        suffixed=True,
    ),
)


def topic_spec(topic: str) -> TopicSpec:
    for spec in TOPIC_SPECS:
        if spec.suffixed:
            if topic.startswith(spec.prefix) and len(topic) > len(spec.prefix):
                return spec
        elif topic == spec.prefix:
            return spec
    raise TopicError(f"unknown topic {topic!r}")


class Identity:
    """Static bearer-token identity store."""

    def __init__(self):
        self._by_token: dict[str, Principal] = {}

    def register(self, token: str, principal: Principal) -> Principal:
        if token in self._by_token:
            raise ValueError(f"token already registered")
        self._by_token[token] = principal
        return principal

    def authenticate(self, token: str) -> Principal:
        # uniform failure: no oracle about which tokens exist
        p = self._by_token.get(token)
        if p is None:
            raise AuthenticationError("authentication failed")
        return p


def authorize(principal: Principal, topic: str, action: str) -> bool:
    """action is 'publish' or 'subscribe'; unknown topics simply deny."""
    try:
        spec = topic_spec(topic)
    except TopicError:
        return False
    roles = spec.publish if action == "publish" else spec.subscribe
    own = spec.publish_own if action == "publish" else spec.subscribe_own
    if principal.role not in roles:
        return False
    if principal.role in own:
        return topic == spec.prefix + principal.actor_id
    return True


@dataclass
class Subscription:
    topic: str
    principal: Principal
    cursor: int  # index into the topic's event list


class Broker:
    """In-process topic broker with a durable, deterministic global log."""

    def __init__(self, clock: Callable[[], LogicalTime]):
        self._clock = clock
        self._topics: dict[str, list[Event]] = {}
        self._log: list[Event] = []
        self._subs: list[Subscription] = []
        self._lock = threading.RLock()
        self._new_event = threading.Condition(self._lock)

    def publish(self, principal: Principal, topic: str, type_: str, payload: dict) -> int:
        topic_spec(topic)  # raises TopicError for undeclared names
        if not authorize(principal, topic, "publish"):
            raise AccessError(f"{principal.actor_id} may not publish on {topic}")
        with self._lock:
            events = self._topics.setdefault(topic, [])
            event = Event(
                topic=topic,
                seq=len(events) + 1,
                time=self._clock(),
                publisher=principal.actor_id,
                type=type_,
                payload=payload,
            )
            events.append(event)
            self._log.append(event)
            self._new_event.notify_all()
            return event.seq

    def subscribe(self, principal: Principal, topic: str) -> Subscription:
        topic_spec(topic)
        if not authorize(principal, topic, "subscribe"):
            raise AccessError(f"{principal.actor_id} may not subscribe to {topic}")
        with self._lock:
            sub = Subscription(topic, principal, len(self._topics.get(topic, ())))
            self._subs.append(sub)
            return sub

    def poll(self, sub: Subscription) -> list[Event]:
        with self._lock:
            events = self._topics.get(sub.topic, ())
            new = list(events[sub.cursor :])
            sub.cursor = len(events)
            return new

    # -- log access -----------------------------------------------------

    def log_events(self, after_index: int = 0) -> list[Event]:
        with self._lock:
            return list(self._log[after_index:])

    def log_size(self) -> int:
        with self._lock:
            return len(self._log)

    def wait_for_events(self, after_index: int, timeout: float) -> list[Event]:
        """Block up to timeout for log entries past after_index (push streams)."""
        with self._new_event:
            if len(self._log) <= after_index:
                self._new_event.wait(timeout)
            return list(self._log[after_index:])

    def export_lines(self) -> list[str]:
        """All events in (logical_time, topic, seq) order, canonical JSON."""
        with self._lock:
            ordered = sorted(self._log, key=lambda e: (e.time.sort_key, e.topic, e.seq))
            return [canonical_json(e.to_json_obj()) for e in ordered]


class RunRegistry:
    """Finished and in-flight runs by id, for report export."""

    def __init__(self):
        self._runs: dict[str, Broker] = {}

    def register(self, run_id: str, broker: Broker) -> None:
        self._runs[run_id] = broker

    def export_log(self, run_id: str) -> list[str]:
        if run_id not in self._runs:
            raise NotFoundError(run_id)
        return self._runs[run_id].export_lines()


@dataclass(frozen=True)
class DeviceRecord:
    device_id: str
    customer_id: str
    device: dv.Device


class DeviceRegistry:
    """Owner-indexed capability descriptors; immutable during a run."""

    def __init__(self, grid: TimeGrid):
        self._grid = grid
        self._by_customer: dict[str, list[DeviceRecord]] = {}
        self._by_id: dict[str, DeviceRecord] = {}

    def register(self, customer_id: str, device: dv.Device) -> DeviceRecord:
        dv.validate_device(device, self._grid)
        if device.device_id in self._by_id:
            raise ValueError(f"device {device.device_id} already registered")
        rec = DeviceRecord(device.device_id, customer_id, device)
        self._by_id[device.device_id] = rec
        self._by_customer.setdefault(customer_id, []).append(rec)
        return rec

    def for_customer(self, customer_id: str) -> list[DeviceRecord]:
        return sorted(self._by_customer.get(customer_id, []), key=lambda r: r.device_id)

    def get(self, device_id: str) -> DeviceRecord:
        if device_id not in self._by_id:
            raise NotFoundError(device_id)
        return self._by_id[device_id]
