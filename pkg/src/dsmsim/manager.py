"""Demand-side-manager agent.

Aggregates contracted flexibility from its subscribers' controllers, prices
an offer at incentive cost plus a margin (optionally with a seeded jitter so
distinct runs bid distinctly), splits an accepted offer into per-customer
signals proportionally to each customer's contribution, and reports measured
fulfillment for settlement.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from fractions import Fraction
from math import ceil
from typing import Callable, Optional

from .b2b import B2BMarket, Offer, ShiftRequest
from .b2c import B2CMarket
from .core import (
    MWMIN_PER_KWH,
    LogicalTime,
    PowerProfile,
    round_half_even,
    sum_profiles,
)
from .eecs import DsmSignal
from .platform import Principal


def parse_fraction(value) -> Fraction:
    """Decimal-exact parsing; scenario JSON may carry '0.2', 0.2 or 20/100."""
    if isinstance(value, Fraction):
        return value
    return Fraction(str(value))


@dataclass(frozen=True)
class ManagerPolicy:
    margin_fraction: Fraction = Fraction(1, 5)
    max_offer_fraction: Fraction = Fraction(9, 10)
    price_jitter_fraction: Fraction = Fraction(0)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ManagerPolicy":
        return cls(
            margin_fraction=parse_fraction(obj.get("margin_fraction", "0.2")),
            max_offer_fraction=parse_fraction(obj.get("max_offer_fraction", "0.9")),
            price_jitter_fraction=parse_fraction(obj.get("price_jitter_fraction", "0")),
        )


@dataclass
class FlexibilityEstimate:
    per_customer: dict  # customer_id -> PowerProfile
    aggregate: PowerProfile
    incentive_cost_ct: int


def derived_rng(seed: int, salt: str) -> random.Random:
    """Stable per-agent stream independent of call order elsewhere."""
    digest = hashlib.sha256(f"{seed}:{salt}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def largest_remainder_split(total: int, weights: dict) -> dict:
    """Integer split of `total` proportional to weights; remainders go to the
    largest fractional parts, ties to the lexicographically first key."""
    weight_sum = sum(weights.values())
    if weight_sum == 0 or total == 0:
        return {k: 0 for k in weights}
    shares = {}
    remainders = []
    placed = 0
    for key in sorted(weights):
        exact = Fraction(total * weights[key], weight_sum)
        base = int(exact)  # floor for non-negative
        shares[key] = base
        placed += base
        remainders.append((-(exact - base), key))
    remainders.sort()
    for _, key in remainders[: total - placed]:
        shares[key] += 1
    return shares


class DsmManagerAgent:
    def __init__(
        self,
        principal: Principal,
        policy: ManagerPolicy,
        b2c: B2CMarket,
        b2b: B2BMarket,
        eecs_by_customer: dict,
        scope_members: Callable[[str], frozenset],
        rng: random.Random,
        broker,
    ):
        self.principal = principal
        self.manager_id = principal.actor_id
        self.policy = policy
        self._b2c = b2c
        self._b2b = b2b
        self._eecs = eecs_by_customer
        self._scope_members = scope_members
        self._rng = rng
        self._broker = broker
        self._signal_counter = 0
        # request_id -> {customer_id: signal_id}; filled at dispatch
        self.dispatched: dict[str, dict] = {}
        self._allocations: dict[str, dict] = {}

    # -- bidding -----------------------------------------------------------

    def estimate_flexibility(self, request: ShiftRequest, now_slot: int) -> FlexibilityEstimate:
        window = request.target.slots()
        members = self._scope_members(request.scope)
        per_customer = {}
        cost_numer = 0
        for cid in self._b2c.subscribers_of(self.manager_id):
            if cid not in members:
                continue
            if not self._b2c.can_signal(cid, now_slot):
                continue
            flex = self._eecs[cid].query_flexibility(window, request.direction, now_slot)
            flex = flex.clipped(request.target.start_slot, request.target.end_slot)
            if flex.is_empty():
                continue
            per_customer[cid] = flex
            rate = self._b2c.programme_of(cid).incentive_rate_ct_per_kwh
            cost_numer += rate * flex.energy_mwmin()
        grid = request.target.grid
        aggregate = sum_profiles(grid, per_customer.values())
        return FlexibilityEstimate(
            per_customer=per_customer,
            aggregate=aggregate,
            incentive_cost_ct=round_half_even(cost_numer, MWMIN_PER_KWH),
        )

    def build_offer(
        self, estimate: FlexibilityEstimate, request: ShiftRequest
    ) -> Optional[tuple[PowerProfile, int, dict]]:
        """Returns (supply, price_ct, per-customer allocation) or None."""
        if estimate.aggregate.is_empty():
            return None
        target = request.target
        vals = []
        for t in target.slots():
            capped = int(self.policy.max_offer_fraction * estimate.aggregate.value_at(t))
            vals.append(min(capped, target.value_at(t)))
        supply = PowerProfile(target.grid, target.start_slot, tuple(vals)).trimmed()
        if supply.is_empty():
            return None
        allocation = self._allocate(estimate.per_customer, supply)
        cost_numer = 0
        for cid, profile in allocation.items():
            rate = self._b2c.programme_of(cid).incentive_rate_ct_per_kwh
            cost_numer += rate * profile.energy_mwmin()
        cost_fr = Fraction(cost_numer, MWMIN_PER_KWH)
        factor = (1 + self.policy.margin_fraction) * self._jitter_factor()
        price_ct = ceil(cost_fr * factor)
        return supply, price_ct, allocation

    def _jitter_factor(self) -> Fraction:
        if self.policy.price_jitter_fraction == 0:
            return Fraction(1)
        draw = Fraction(self._rng.randrange(1_000_000), 1_000_000)
        return 1 + self.policy.price_jitter_fraction * draw

    def bid_on(self, request: ShiftRequest, now_slot: int) -> Optional[Offer]:
        estimate = self.estimate_flexibility(request, now_slot)
        built = self.build_offer(estimate, request)
        if built is None:
            return None
        supply, price_ct, allocation = built
        offer = self._b2b.place_offer(self.principal, request.request_id, supply, price_ct, now_slot)
        self._allocations[offer.offer_id] = allocation
        return offer

    def _allocate(self, per_customer: dict, supply: PowerProfile) -> dict:
        """Per-slot proportional split with largest-remainder rounding; the
        shares sum to the supply exactly, in milliwatts."""
        split: dict[str, list] = {cid: [0] * len(supply.values_mw) for cid in per_customer}
        for i, t in enumerate(supply.slots()):
            weights = {cid: p.value_at(t) for cid, p in per_customer.items() if p.value_at(t) > 0}
            shares = largest_remainder_split(supply.values_mw[i], weights)
            for cid, mw in shares.items():
                split[cid][i] = mw
        out = {}
        for cid, vals in split.items():
            profile = PowerProfile(supply.grid, supply.start_slot, tuple(vals)).trimmed()
            if not profile.is_empty():
                out[cid] = profile
        return out

    # -- dispatch ------------------------------------------------------------

    def dispatch_signals(self, request: ShiftRequest, offer: Offer, now: LogicalTime) -> list[DsmSignal]:
        allocation = self._allocations[offer.offer_id]
        signals = []
        sent = self.dispatched.setdefault(request.request_id, {})
        for cid in sorted(allocation):
            sub = self._b2c.active_subscription(cid)
            if sub is None or not self._b2c.can_signal(cid, now.slot):
                continue  # cancelled or capped since bidding: shortfall accepted
            rate = self._b2c.programme_of(cid).incentive_rate_ct_per_kwh
            self._signal_counter += 1
            signal = DsmSignal(
                signal_id=f"sig-{self.manager_id}-{self._signal_counter:04d}",
                manager_id=self.manager_id,
                customer_id=cid,
                direction=request.direction,
                requested=allocation[cid],
                incentive_rate_ct_per_kwh=rate,
                issued_at=now,
            )
            self._b2c.note_signal(cid, now.slot)
            self._broker.publish(self.principal, f"signals.{cid}", "dsm_signal", signal.to_json_obj())
            sent[cid] = signal
            signals.append(signal)
        return signals

    # -- fulfillment -----------------------------------------------------------

    def report_fulfillment(self, request_id: str) -> tuple[PowerProfile, list, list]:
        """Measured delivery for this manager's signals on one request.

        Returns (summed profile, per-signal [(signal, delivered_mwmin)],
        missing-meter warnings)."""
        sent = self.dispatched.get(request_id, {})
        profiles = []
        per_signal = []
        warnings = []
        grid = None
        for cid in sorted(sent):
            signal = sent[cid]
            grid = signal.requested.grid
            delivered, missing = self._eecs[cid].delivered_profile(signal.signal_id)
            if missing:
                warnings.append({"customer_id": cid, "signal_id": signal.signal_id, "slots": missing})
            profiles.append(delivered)
            per_signal.append((signal, delivered.energy_mwmin()))
        if grid is None:
            return PowerProfile.empty(self._b2b.get(request_id).target.grid), [], []
        return sum_profiles(grid, profiles), per_signal, warnings
