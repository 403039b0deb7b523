"""B2C marketplace: programme catalogue, contracts, incentive crediting.

A customer holds at most one active subscription; an active subscription is
exactly what authorizes that programme's manager to signal the customer.
Credits are pay-for-performance: programme rate times delivered energy,
rounded half-to-even to whole cents once at settlement.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .core import credit_cents
from .platform import AccessError, Broker, NotFoundError, Principal, Role


class ConflictError(RuntimeError):
    pass


class DuplicateError(RuntimeError):
    pass


class ProgrammeValidationError(ValueError):
    pass


@dataclass(frozen=True)
class Programme:
    programme_id: str
    manager_id: str
    tariff_ct_per_kwh: tuple  # per-slot price vector (flat tariffs are expanded)
    incentive_rate_ct_per_kwh: int
    max_signals_per_day: int
    description: str = ""

    def to_json_obj(self) -> dict:
        return {
            "programme_id": self.programme_id,
            "manager_id": self.manager_id,
            "tariff_ct_per_kwh": list(self.tariff_ct_per_kwh),
            "incentive_rate_ct_per_kwh": self.incentive_rate_ct_per_kwh,
            "max_signals_per_day": self.max_signals_per_day,
            "description": self.description,
        }


class SubscriptionStatus(str, Enum):
    ACTIVE = "active"
    CANCELLED = "cancelled"


@dataclass
class Subscription:
    subscription_id: str
    customer_id: str
    programme_id: str
    start_slot: int
    status: SubscriptionStatus

    def to_json_obj(self) -> dict:
        return {
            "subscription_id": self.subscription_id,
            "customer_id": self.customer_id,
            "programme_id": self.programme_id,
            "start_slot": self.start_slot,
            "status": self.status.value,
        }


@dataclass(frozen=True)
class CreditLedgerEntry:
    customer_id: str
    signal_id: str
    delivered_mwmin: int
    credit_ct: int

    def to_json_obj(self) -> dict:
        return {
            "customer_id": self.customer_id,
            "signal_id": self.signal_id,
            "delivered_mwmin": self.delivered_mwmin,
            "credit_ct": self.credit_ct,
        }


class B2CMarket:
    def __init__(self, broker: Broker, engine: Principal, slots_per_day: int):
        self._broker = broker
        self._engine = engine
        self._slots_per_day = slots_per_day
        self._programmes: dict[str, Programme] = {}
        self._subscriptions: dict[str, Subscription] = {}
        self._active_by_customer: dict[str, str] = {}
        self._ledger: list[CreditLedgerEntry] = []
        self._credited_signals: set[str] = set()
        self._signal_slots: dict[str, list[int]] = {}
        self._sub_counter = 0

    # -- catalogue -------------------------------------------------------

    def publish_programme(self, manager: Principal, programme: Programme) -> str:
        if manager.role is not Role.DSM_MANAGER:
            raise AccessError("only demand-side managers publish programmes")
        if programme.manager_id != manager.actor_id:
            raise AccessError("programme must belong to the publishing manager")
        if programme.incentive_rate_ct_per_kwh < 0:
            raise ProgrammeValidationError("incentive_rate_ct_per_kwh: must be >= 0")
        if any(t < 0 for t in programme.tariff_ct_per_kwh):
            raise ProgrammeValidationError("tariff_ct_per_kwh: must be >= 0")
        if programme.max_signals_per_day < 0:
            raise ProgrammeValidationError("max_signals_per_day: must be >= 0")
        if programme.programme_id in self._programmes:
            raise DuplicateError(programme.programme_id)
        self._programmes[programme.programme_id] = programme
        self._broker.publish(manager, "market.programmes", "programme_published", programme.to_json_obj())
        return programme.programme_id

    def list_programmes(self) -> list[Programme]:
        return [self._programmes[k] for k in sorted(self._programmes)]

    def get_programme(self, programme_id: str) -> Programme:
        if programme_id not in self._programmes:
            raise NotFoundError(programme_id)
        return self._programmes[programme_id]

    # -- contracts ---------------------------------------------------------

    def subscribe(self, customer: Principal, programme_id: str, start_slot: int) -> Subscription:
        if customer.role is not Role.CUSTOMER:
            raise AccessError("only customers subscribe to programmes")
        if programme_id not in self._programmes:
            raise NotFoundError(programme_id)
        if customer.actor_id in self._active_by_customer:
            raise ConflictError(f"{customer.actor_id} already holds an active subscription")
        self._sub_counter += 1
        sub = Subscription(
            subscription_id=f"sub-{self._sub_counter:04d}",
            customer_id=customer.actor_id,
            programme_id=programme_id,
            start_slot=start_slot,
            status=SubscriptionStatus.ACTIVE,
        )
        self._subscriptions[sub.subscription_id] = sub
        self._active_by_customer[customer.actor_id] = sub.subscription_id
        self._broker.publish(customer, "market.subscriptions", "subscribed", sub.to_json_obj())
        return sub

    def unsubscribe(self, customer: Principal, subscription_id: str) -> Subscription:
        if subscription_id not in self._subscriptions:
            raise NotFoundError(subscription_id)
        sub = self._subscriptions[subscription_id]
        if sub.customer_id != customer.actor_id:
            raise AccessError("subscription belongs to another customer")
        if sub.status is SubscriptionStatus.CANCELLED:
            return sub  # idempotent
        sub.status = SubscriptionStatus.CANCELLED
        del self._active_by_customer[sub.customer_id]
        self._broker.publish(customer, "market.subscriptions", "unsubscribed", sub.to_json_obj())
        return sub

    def active_subscription(self, customer_id: str) -> Optional[Subscription]:
        sid = self._active_by_customer.get(customer_id)
        return self._subscriptions[sid] if sid else None

    def programme_of(self, customer_id: str) -> Optional[Programme]:
        sub = self.active_subscription(customer_id)
        return self._programmes[sub.programme_id] if sub else None

    def subscribers_of(self, manager_id: str) -> list[str]:
        out = []
        for cid, sid in self._active_by_customer.items():
            programme = self._programmes[self._subscriptions[sid].programme_id]
            if programme.manager_id == manager_id:
                out.append(cid)
        return sorted(out)

    # -- signal budget ------------------------------------------------------

    def can_signal(self, customer_id: str, slot: int) -> bool:
        programme = self.programme_of(customer_id)
        if programme is None:
            return False
        day = slot // self._slots_per_day
        used = sum(1 for s in self._signal_slots.get(customer_id, ()) if s // self._slots_per_day == day)
        return used < programme.max_signals_per_day

    def note_signal(self, customer_id: str, slot: int) -> None:
        self._signal_slots.setdefault(customer_id, []).append(slot)

    # -- incentive ledger ----------------------------------------------------

    def credit_incentive(
        self, signal_id: str, customer_id: str, delivered_mwmin: int, rate_ct_per_kwh: int
    ) -> CreditLedgerEntry:
        """Settle one signal at the rate it was dispatched with."""
        if delivered_mwmin < 0:
            raise ValueError("delivered energy must be >= 0")
        if signal_id in self._credited_signals:
            raise DuplicateError(f"signal {signal_id} already settled")
        entry = CreditLedgerEntry(
            customer_id=customer_id,
            signal_id=signal_id,
            delivered_mwmin=delivered_mwmin,
            credit_ct=credit_cents(rate_ct_per_kwh, delivered_mwmin),
        )
        self._credited_signals.add(signal_id)
        self._ledger.append(entry)
        self._broker.publish(
            self._engine, f"credits.{customer_id}", "incentive_credited", entry.to_json_obj()
        )
        return entry

    def ledger(self) -> list[CreditLedgerEntry]:
        return list(self._ledger)

    def balance_ct(self, customer_id: str) -> int:
        return sum(e.credit_ct for e in self._ledger if e.customer_id == customer_id)
