"""B2B marketplace: shift-request lifecycle, clearing, acceptance, settlement.

Sealed-bid, single round, pay-as-bid. Retailers fall back to the intra-day
exchange when that is cheaper; grid operators have no such fallback, a local
constraint cannot be bought away. Settlement pays each winning manager its
offer price scaled by the delivered-over-offered energy fraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from . import clearing
from .core import (
    MWMIN_PER_KWH,
    Direction,
    PowerProfile,
    round_half_even,
    sum_profiles,
)
from .platform import AccessError, Broker, NotFoundError, Principal, Role


class RequestState(str, Enum):
    PUBLISHED = "published"
    BIDDING = "bidding"
    CLEARED = "cleared"
    ACCEPTED_OFFERS = "accepted_offers"
    WENT_TO_EXCHANGE = "went_to_exchange"
    REJECTED = "rejected"
    DISPATCHED = "dispatched"
    SETTLED = "settled"


class StateError(RuntimeError):
    pass


class DeadlineError(RuntimeError):
    pass


class RequestValidationError(ValueError):
    pass


class DuplicateError(RuntimeError):
    pass


@dataclass(frozen=True)
class Offer:
    offer_id: str
    request_id: str
    manager_id: str
    supply: PowerProfile
    price_ct: int

    def to_json_obj(self) -> dict:
        return {
            "offer_id": self.offer_id,
            "request_id": self.request_id,
            "manager_id": self.manager_id,
            "supply": self.supply.to_json_obj(),
            "price_ct": self.price_ct,
        }


@dataclass(frozen=True)
class AcceptanceRecord:
    decision: RequestState
    clearing_cost_ct: Optional[int]  # None when clearing was infeasible
    exchange_cost_ct: Optional[int]  # None for grid operators
    recorded_cost_ct: Optional[int]  # cost of the chosen channel

    def to_json_obj(self) -> dict:
        return {
            "decision": self.decision.value,
            "clearing_cost_ct": self.clearing_cost_ct,
            "exchange_cost_ct": self.exchange_cost_ct,
            "recorded_cost_ct": self.recorded_cost_ct,
        }


@dataclass(frozen=True)
class SettlementRecord:
    request_id: str
    delivered: dict  # manager_id -> PowerProfile
    payouts_ct: dict  # manager_id -> int
    offered_mwmin: dict  # manager_id -> energy the selected offers promised
    fulfillment_ppm: dict  # manager_id -> delivered/offered in parts per million
    shortfall: PowerProfile
    credits: tuple  # CreditLedgerEntry objects, audit mirror of the B2C ledger

    def to_json_obj(self) -> dict:
        return {
            "request_id": self.request_id,
            "delivered": {m: p.to_json_obj() for m, p in sorted(self.delivered.items())},
            "payouts_ct": {m: c for m, c in sorted(self.payouts_ct.items())},
            "offered_mwmin": {m: e for m, e in sorted(self.offered_mwmin.items())},
            "fulfillment_ppm": {m: f for m, f in sorted(self.fulfillment_ppm.items())},
            "shortfall": self.shortfall.to_json_obj(),
            "credits": [e.to_json_obj() for e in self.credits],
        }


@dataclass
class ShiftRequest:
    request_id: str
    requester_id: str
    requester_role: Role
    direction: Direction
    scope: str
    target: PowerProfile
    bid_deadline_slot: int
    budget_cap_ct: Optional[int]
    state: RequestState = RequestState.PUBLISHED
    clearing_result: Optional[clearing.ClearingOutcome] = None
    acceptance: Optional[AcceptanceRecord] = None
    settlement: Optional[SettlementRecord] = None

    def to_json_obj(self) -> dict:
        obj = {
            "request_id": self.request_id,
            "requester_id": self.requester_id,
            "requester_role": self.requester_role.value,
            "direction": self.direction.value,
            "scope": self.scope,
            "target": self.target.to_json_obj(),
            "bid_deadline_slot": self.bid_deadline_slot,
            "budget_cap_ct": self.budget_cap_ct,
            "state": self.state.value,
        }
        if self.clearing_result is not None:
            obj["clearing"] = self.clearing_result.to_json_obj()
        if self.acceptance is not None:
            obj["acceptance"] = self.acceptance.to_json_obj()
        if self.settlement is not None:
            obj["settlement"] = self.settlement.to_json_obj()
        return obj


def exchange_cost_ct(target: PowerProfile, quotes_ct_per_kwh) -> int:
    """Cost of buying the target energy at the exchange, cent-rounded once."""
    m = target.grid.slot_duration_minutes
    total = sum(target.value_at(t) * m * quotes_ct_per_kwh[t] for t in target.slots())
    return round_half_even(total, MWMIN_PER_KWH)


class B2BMarket:
    def __init__(
        self,
        broker: Broker,
        engine: Principal,
        exchange_quotes_ct_per_kwh,
        exact_threshold: int = clearing.DEFAULT_EXACT_THRESHOLD,
    ):
        self._broker = broker
        self._engine = engine
        self._quotes = exchange_quotes_ct_per_kwh
        self._exact_threshold = exact_threshold
        self._requests: dict[str, ShiftRequest] = {}
        self._offers: dict[str, list[Offer]] = {}
        self._offer_counter = 0
        self._request_counter = 0

    # -- request lifecycle -------------------------------------------------

    def submit_request(
        self,
        requester: Principal,
        direction: Direction,
        scope: str,
        target: PowerProfile,
        bid_deadline_slot: int,
        current_slot: int,
        budget_cap_ct: Optional[int] = None,
        request_id: Optional[str] = None,
    ) -> ShiftRequest:
        if requester.role not in (Role.RETAILER, Role.GRID_OPERATOR):
            raise AccessError("only retailers and grid operators submit shift requests")
        if target.is_empty():
            raise RequestValidationError("target: must be non-empty")
        if bid_deadline_slot < current_slot:
            raise RequestValidationError("bid_deadline_slot: already passed")
        self._request_counter += 1
        rid = request_id or f"req-{self._request_counter:04d}"
        req = ShiftRequest(
            request_id=rid,
            requester_id=requester.actor_id,
            requester_role=requester.role,
            direction=direction,
            scope=scope,
            target=target,
            bid_deadline_slot=bid_deadline_slot,
            budget_cap_ct=budget_cap_ct,
        )
        self._requests[rid] = req
        self._offers[rid] = []
        req.state = RequestState.BIDDING
        self._broker.publish(requester, f"requests.{scope}", "shift_request", req.to_json_obj())
        return req

    def get(self, request_id: str) -> ShiftRequest:
        if request_id not in self._requests:
            raise NotFoundError(request_id)
        return self._requests[request_id]

    def all_requests(self) -> list[ShiftRequest]:
        return [self._requests[k] for k in sorted(self._requests)]

    def place_offer(
        self,
        manager: Principal,
        request_id: str,
        supply: PowerProfile,
        price_ct: int,
        current_slot: int,
    ) -> Offer:
        if manager.role is not Role.DSM_MANAGER:
            raise AccessError("only demand-side managers place offers")
        req = self.get(request_id)
        if req.state is not RequestState.BIDDING:
            raise StateError(f"request {request_id} is {req.state.value}, not bidding")
        if current_slot > req.bid_deadline_slot:
            raise DeadlineError(f"bidding on {request_id} closed at slot {req.bid_deadline_slot}")
        if supply.is_empty():
            raise RequestValidationError("supply: must be non-empty")
        if not (req.target.start_slot <= supply.start_slot and supply.end_slot <= req.target.end_slot):
            raise RequestValidationError("supply: window must lie within the target window")
        if price_ct < 0:
            raise RequestValidationError("price_ct: must be >= 0")
        self._offer_counter += 1
        offer = Offer(
            offer_id=f"off-{self._offer_counter:04d}",
            request_id=request_id,
            manager_id=manager.actor_id,
            supply=supply,
            price_ct=price_ct,
        )
        self._offers[request_id].append(offer)  # sealed: not published anywhere
        return offer

    def offers_for(self, request_id: str) -> list[Offer]:
        return list(self._offers[request_id])

    # -- clearing and acceptance --------------------------------------------

    def clear_request(self, request_id: str, current_slot: int) -> clearing.ClearingOutcome:
        req = self.get(request_id)
        if req.state is not RequestState.BIDDING:
            raise StateError(f"request {request_id} is {req.state.value}, not bidding")
        if current_slot < req.bid_deadline_slot:
            raise StateError(f"bid deadline of {request_id} not reached")
        instance = [
            clearing.ClearingOffer(o.offer_id, o.supply, o.price_ct)
            for o in self._offers[request_id]
        ]
        outcome = clearing.solve(req.target, instance, req.budget_cap_ct, self._exact_threshold)
        req.clearing_result = outcome
        req.state = RequestState.CLEARED
        self._broker.publish(
            self._engine,
            "market.clearings",
            "request_cleared",
            {"request_id": request_id, **outcome.to_json_obj()},
        )
        return outcome

    def decide_acceptance(self, request_id: str) -> AcceptanceRecord:
        req = self.get(request_id)
        if req.state is not RequestState.CLEARED:
            raise StateError(f"request {request_id} is {req.state.value}, not cleared")
        outcome = req.clearing_result
        clearing_cost = outcome.total_price_ct if outcome.feasible else None
        if req.requester_role is Role.RETAILER:
            exchange = exchange_cost_ct(req.target, self._quotes)
            # ties prefer the offers: contracted flexibility over bought energy
            if outcome.feasible and outcome.total_price_ct <= exchange:
                decision, recorded = RequestState.ACCEPTED_OFFERS, outcome.total_price_ct
            else:
                decision, recorded = RequestState.WENT_TO_EXCHANGE, exchange
            record = AcceptanceRecord(decision, clearing_cost, exchange, recorded)
        else:
            if outcome.feasible:
                record = AcceptanceRecord(
                    RequestState.ACCEPTED_OFFERS, clearing_cost, None, clearing_cost
                )
            else:
                record = AcceptanceRecord(RequestState.REJECTED, None, None, None)
        req.acceptance = record
        req.state = record.decision
        self._broker.publish(
            self._engine,
            "market.clearings",
            "acceptance_decided",
            {"request_id": request_id, **record.to_json_obj()},
        )
        return record

    def mark_dispatched(self, request_id: str) -> None:
        req = self.get(request_id)
        if req.state is not RequestState.ACCEPTED_OFFERS:
            raise StateError(f"request {request_id} is {req.state.value}, not accepted")
        req.state = RequestState.DISPATCHED

    # -- settlement -----------------------------------------------------------

    def settle_request(self, request_id: str, delivered: dict, credits: tuple) -> SettlementRecord:
        """delivered: manager_id -> measured PowerProfile over the window."""
        req = self.get(request_id)
        if req.state is RequestState.SETTLED:
            raise DuplicateError(f"request {request_id} already settled")
        if req.state is not RequestState.DISPATCHED:
            raise StateError(f"request {request_id} is {req.state.value}, not dispatched")
        selected = {oid: self._offer_by_id(request_id, oid) for oid in req.clearing_result.selected}
        offered_by_manager: dict[str, int] = {}
        price_by_manager: dict[str, int] = {}
        for offer in selected.values():
            offered_by_manager[offer.manager_id] = (
                offered_by_manager.get(offer.manager_id, 0) + offer.supply.energy_mwmin()
            )
            price_by_manager[offer.manager_id] = (
                price_by_manager.get(offer.manager_id, 0) + offer.price_ct
            )
        payouts = {}
        fulfillment = {}
        for manager_id in sorted(price_by_manager):
            offered = offered_by_manager[manager_id]
            got = delivered.get(manager_id)
            delivered_mwmin = got.energy_mwmin() if got else 0
            fraction_num = min(delivered_mwmin, offered)
            price = price_by_manager[manager_id]
            payout = round_half_even(price * fraction_num, offered) if offered else 0
            payouts[manager_id] = min(payout, price)
            fulfillment[manager_id] = (
                round_half_even(fraction_num * 1_000_000, offered) if offered else 0
            )
        total_delivered = sum_profiles(
            req.target.grid, (p for p in delivered.values())
        )
        shortfall_vals = tuple(
            max(0, req.target.value_at(t) - total_delivered.value_at(t))
            for t in req.target.slots()
        )
        shortfall = PowerProfile(req.target.grid, req.target.start_slot, shortfall_vals).trimmed()
        record = SettlementRecord(
            request_id=request_id,
            delivered=dict(delivered),
            payouts_ct=payouts,
            offered_mwmin=offered_by_manager,
            fulfillment_ppm=fulfillment,
            shortfall=shortfall,
            credits=credits,
        )
        req.settlement = record
        req.state = RequestState.SETTLED
        self._broker.publish(
            self._engine, "market.settlements", "request_settled", record.to_json_obj()
        )
        return record

    def _offer_by_id(self, request_id: str, offer_id: str) -> Offer:
        for o in self._offers[request_id]:
            if o.offer_id == offer_id:
                return o
        raise NotFoundError(offer_id)
