"""Minimum-cost offer-combination solver.

Selects the cheapest set of all-or-nothing offers whose pointwise sum covers
a target shift profile, optionally under a budget cap. Exact branch-and-bound
(price lower bound from the best remaining cost-per-energy ratio) up to
`exact_threshold` offers; greedy cost-per-uncovered-kWh with a one-pass
redundancy sweep beyond that. Ties break to fewer offers, then the
lexicographically smallest sorted offer-id list.

Instances round-trip through standalone JSON files so the solver can be
driven in isolation (see `clear` CLI subcommand).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .core import PowerProfile, TimeGrid, ceil_div, sum_profiles

DEFAULT_EXACT_THRESHOLD = 24


@dataclass(frozen=True)
class ClearingOffer:
    offer_id: str
    supply: PowerProfile
    price_ct: int


@dataclass(frozen=True)
class ClearingOutcome:
    selected: tuple[str, ...]  # sorted offer ids
    total_price_ct: int
    coverage: PowerProfile
    feasible: bool
    method: str  # "exact" or "greedy"

    def to_json_obj(self) -> dict:
        return {
            "selected": list(self.selected),
            "total_price_ct": self.total_price_ct,
            "coverage": self.coverage.to_json_obj(),
            "feasible": self.feasible,
            "method": self.method,
        }


def _selection_key(price: int, ids) -> tuple:
    ids = tuple(sorted(ids))
    return (price, len(ids), ids)


def _capped_energy(supply_vals, deficit) -> int:
    """Useful coverage of an offer against a deficit vector, in mW-slots."""
    return sum(min(s, d) for s, d in zip(supply_vals, deficit) if d > 0)


def _vectorize(target: PowerProfile, offers) -> tuple[list[int], list[tuple]]:
    """Flatten profiles onto the target window; drops offers that cannot
    contribute anywhere (they never appear in a minimal selection)."""
    slots = list(target.slots())
    t_vals = [target.value_at(s) for s in slots]
    rows = []
    for o in offers:
        vals = [o.supply.value_at(s) for s in slots]
        if _capped_energy(vals, t_vals) > 0:
            rows.append((o.offer_id, vals, o.price_ct))
    return t_vals, rows


def _solve_exact(t_vals, rows, budget) -> Optional[tuple]:
    n = len(rows)
    # branch on the most cost-efficient offers first to tighten the bound early
    rows = sorted(
        rows,
        key=lambda r: (Fraction(r[2], max(1, _capped_energy(r[1], t_vals))), r[0]),
    )
    suffix_supply = [[0] * len(t_vals) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        suffix_supply[i] = [a + b for a, b in zip(suffix_supply[i + 1], rows[i][1])]

    best: list = [None]  # (price, count, ids) selection key

    def lower_bound(deficit, start, cost) -> Optional[int]:
        """Admissible: any covering completion pays at least the cheapest
        remaining cost-per-unit times the missing energy."""
        need = sum(deficit)
        if need == 0:
            return cost
        best_ratio = None
        for oid, vals, price in rows[start:]:
            cov = _capped_energy(vals, deficit)
            if cov <= 0:
                continue
            if best_ratio is None or price * best_ratio[1] < best_ratio[0] * cov:
                best_ratio = (price, cov)
        if best_ratio is None:
            return None  # cannot be covered
        return cost + ceil_div(need * best_ratio[0], best_ratio[1])

    def dfs(i, deficit, cost, chosen):
        need_slots = [d for d in deficit if d > 0]
        if not need_slots:
            key = _selection_key(cost, chosen)
            if best[0] is None or key < best[0]:
                best[0] = key
            return
        if i == n:
            return
        if any(d > s for d, s in zip(deficit, suffix_supply[i])):
            return  # even taking everything left cannot cover
        lb = lower_bound(deficit, i, cost)
        if lb is None:
            return
        if budget is not None and lb > budget:
            return
        if best[0] is not None and lb > best[0][0]:
            return
        oid, vals, price = rows[i]
        if budget is None or cost + price <= budget:
            dfs(
                i + 1,
                [max(0, d - v) for d, v in zip(deficit, vals)],
                cost + price,
                chosen + [oid],
            )
        dfs(i + 1, deficit, cost, chosen)

    dfs(0, list(t_vals), 0, [])
    return best[0]


def _solve_greedy(t_vals, rows, budget) -> Optional[tuple]:
    deficit = list(t_vals)
    remaining = list(rows)
    picked = []
    while any(d > 0 for d in deficit):
        best_i = None
        best_key = None
        for idx, (oid, vals, price) in enumerate(remaining):
            cov = _capped_energy(vals, deficit)
            if cov <= 0:
                continue
            key = (Fraction(price, cov), oid)
            if best_key is None or key < best_key:
                best_i, best_key = idx, key
        if best_i is None:
            return None
        picked.append(remaining.pop(best_i))
        oid, vals, price = picked[-1]
        deficit = [max(0, d - v) for d, v in zip(deficit, vals)]
    # one-pass redundancy sweep, most expensive first
    for cand in sorted(picked, key=lambda r: (-r[2], r[0])):
        others = [r for r in picked if r is not cand]
        covered = all(
            sum(vals[k] for _, vals, _ in others) >= t_vals[k] for k in range(len(t_vals))
        )
        if covered:
            picked = others
    cost = sum(price for _, _, price in picked)
    if budget is not None and cost > budget:
        return None
    return _selection_key(cost, [oid for oid, _, _ in picked])


def solve(
    target: PowerProfile,
    offers,
    budget_cap_ct: Optional[int] = None,
    exact_threshold: int = DEFAULT_EXACT_THRESHOLD,
) -> ClearingOutcome:
    grid = target.grid
    t_vals, rows = _vectorize(target, offers)
    exact = len(offers) <= exact_threshold
    if exact:
        best = _solve_exact(t_vals, rows, budget_cap_ct)
    else:
        best = _solve_greedy(t_vals, rows, budget_cap_ct)
    method = "exact" if exact else "greedy"
    if best is None:
        return ClearingOutcome((), 0, PowerProfile.empty(grid), False, method)
    price, _, ids = best
    by_id = {o.offer_id: o for o in offers}
    coverage = sum_profiles(grid, (by_id[i].supply for i in ids))
    return ClearingOutcome(ids, price, coverage, True, method)


# --------------------------------------------------------------------------
# standalone instance files
# --------------------------------------------------------------------------


class InstanceError(ValueError):
    pass


def load_instance(obj: dict):
    """Parse a clearing instance dict (already JSON-decoded)."""
    try:
        grid = TimeGrid(
            int(obj.get("slot_duration_minutes", 15)),
            int(obj.get("horizon_slots", 96)),
        )
        t = obj["target"]
        target = PowerProfile.from_kw(grid, int(t["start_slot"]), t["values_kw"])
        offers = [
            ClearingOffer(
                str(o["offer_id"]),
                PowerProfile.from_kw(grid, int(o["start_slot"]), o["values_kw"]),
                int(o["price_ct"]),
            )
            for o in obj.get("offers", [])
        ]
        budget = obj.get("budget_cap_ct")
        budget = None if budget is None else int(budget)
        threshold = int(obj.get("exact_threshold", DEFAULT_EXACT_THRESHOLD))
    except (KeyError, TypeError, ValueError) as e:
        raise InstanceError(f"invalid clearing instance: {e}") from e
    if target.is_empty():
        raise InstanceError("invalid clearing instance: empty target")
    if any(o.price_ct < 0 for o in offers):
        raise InstanceError("invalid clearing instance: negative offer price")
    return target, offers, budget, threshold


def load_instance_file(path: str):
    with open(path) as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as e:
            raise InstanceError(f"invalid clearing instance: {e}") from e
    return load_instance(obj)
