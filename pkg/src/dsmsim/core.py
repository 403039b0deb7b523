"""Shared vocabulary: time grid, power profiles, energy, money, directions.

Unit conventions, chosen so every conservation check is exact integer
arithmetic and event logs are byte-reproducible:

  power   -> integer milliwatts (mW)
  energy  -> integer milliwatt-minutes (mW*min); 1 kWh = 60_000_000 mW*min
  money   -> integer euro-cents
  tariffs -> integer euro-cents per kWh

Floats appear only at the human edges (scenario files, report columns).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import total_ordering

MW_PER_KW = 1_000_000
MWMIN_PER_KWH = 60_000_000

# Phase tags of one simulation slot, in execution order. "setup" occurs once
# before slot 0. Logical timestamps (slot, phase) order the event log.
PHASES = (
    "setup",
    "exogenous",
    "triggers",
    "bidding",
    "clearing",
    "dispatch",
    "scheduling",
    "override",
    "metering",
    "settlement",
)
_PHASE_INDEX = {name: i for i, name in enumerate(PHASES)}


class GridMismatchError(ValueError):
    """Two profiles on different time grids were combined."""


class Direction(str, Enum):
    DECREASE = "decrease"
    INCREASE = "increase"


@total_ordering
@dataclass(frozen=True)
class LogicalTime:
    """Slot index plus phase tag; totally ordered by (slot, phase position)."""

    slot: int
    phase: str

    def __post_init__(self):
        if self.phase not in _PHASE_INDEX:
            raise ValueError(f"unknown phase {self.phase!r}")

    @property
    def sort_key(self) -> tuple[int, int]:
        return (self.slot, _PHASE_INDEX[self.phase])

    def __lt__(self, other: "LogicalTime") -> bool:
        return self.sort_key < other.sort_key


@dataclass(frozen=True)
class TimeGrid:
    """Discrete time axis shared by every profile in one run."""

    slot_duration_minutes: int = 15
    horizon_slots: int = 96

    def __post_init__(self):
        if self.slot_duration_minutes <= 0 or 60 % self.slot_duration_minutes:
            raise ValueError("slot_duration_minutes must be positive and divide 60")
        if self.horizon_slots <= 0:
            raise ValueError("horizon_slots must be positive")

    @property
    def slot_hours(self) -> float:
        return self.slot_duration_minutes / 60.0

    @property
    def slots_per_day(self) -> int:
        return (24 * 60) // self.slot_duration_minutes


def kw_to_mw(kw: float) -> int:
    return round(kw * MW_PER_KW)


def mw_to_kw(mw: int) -> float:
    return mw / MW_PER_KW


def kwh_to_mwmin(kwh: float) -> int:
    return round(kwh * MWMIN_PER_KWH)


def mwmin_to_kwh(mwmin: int) -> float:
    return mwmin / MWMIN_PER_KWH


@dataclass(frozen=True)
class PowerProfile:
    """Non-negative per-slot power over a contiguous slot window.

    The empty profile (no slots) is the identity of `add`. Values are mW.
    """

    grid: TimeGrid
    start_slot: int
    values_mw: tuple[int, ...]

    def __post_init__(self):
        if not self.values_mw:
            object.__setattr__(self, "start_slot", 0)  # canonical empty
            return
        if self.start_slot < 0:
            raise ValueError("start_slot must be >= 0")
        if self.start_slot + len(self.values_mw) > self.grid.horizon_slots:
            raise ValueError("profile window exceeds horizon")
        if any(v < 0 for v in self.values_mw):
            raise ValueError("power values must be >= 0")

    @classmethod
    def empty(cls, grid: TimeGrid) -> "PowerProfile":
        return cls(grid, 0, ())

    @classmethod
    def from_kw(cls, grid: TimeGrid, start_slot: int, values_kw) -> "PowerProfile":
        return cls(grid, start_slot, tuple(kw_to_mw(v) for v in values_kw))

    @property
    def end_slot(self) -> int:
        """Exclusive end of the window (start_slot for the empty profile)."""
        return self.start_slot + len(self.values_mw)

    def is_empty(self) -> bool:
        return not self.values_mw

    def slots(self) -> range:
        return range(self.start_slot, self.end_slot)

    def value_at(self, slot: int) -> int:
        if self.start_slot <= slot < self.end_slot:
            return self.values_mw[slot - self.start_slot]
        return 0

    def add(self, other: "PowerProfile") -> "PowerProfile":
        if other.grid != self.grid:
            raise GridMismatchError("profiles live on different time grids")
        if self.is_empty():
            return other
        if other.is_empty():
            return self
        lo = min(self.start_slot, other.start_slot)
        hi = max(self.end_slot, other.end_slot)
        vals = tuple(self.value_at(s) + other.value_at(s) for s in range(lo, hi))
        return PowerProfile(self.grid, lo, vals)

    def covers(self, target: "PowerProfile") -> bool:
        """True iff self(t) >= target(t) on every slot of target's window."""
        if target.grid != self.grid:
            raise GridMismatchError("profiles live on different time grids")
        return all(self.value_at(s) >= target.value_at(s) for s in target.slots())

    def energy_mwmin(self) -> int:
        return sum(self.values_mw) * self.grid.slot_duration_minutes

    def energy_kwh(self) -> float:
        return mwmin_to_kwh(self.energy_mwmin())

    def clipped(self, start: int, end: int) -> "PowerProfile":
        """Restriction to [start, end); may be empty."""
        lo = max(self.start_slot, start)
        hi = min(self.end_slot, end)
        if lo >= hi:
            return PowerProfile.empty(self.grid)
        return PowerProfile(self.grid, lo, self.values_mw[lo - self.start_slot : hi - self.start_slot])

    def trimmed(self) -> "PowerProfile":
        """Drop leading/trailing zero slots (canonical form)."""
        vals = list(self.values_mw)
        start = self.start_slot
        while vals and vals[0] == 0:
            vals.pop(0)
            start += 1
        while vals and vals[-1] == 0:
            vals.pop()
        if not vals:
            return PowerProfile.empty(self.grid)
        return PowerProfile(self.grid, start, tuple(vals))

    def to_json_obj(self) -> dict:
        return {"start_slot": self.start_slot, "values_mw": list(self.values_mw)}

    @classmethod
    def from_json_obj(cls, grid: TimeGrid, obj: dict) -> "PowerProfile":
        return cls(grid, int(obj["start_slot"]), tuple(int(v) for v in obj["values_mw"]))


def profile_add(a: PowerProfile, b: PowerProfile) -> PowerProfile:
    return a.add(b)


def profile_covers(supply: PowerProfile, target: PowerProfile) -> bool:
    return supply.covers(target)


def energy_of(p: PowerProfile) -> float:
    """Energy in kWh; exact integer accounting uses energy_mwmin()."""
    return p.energy_kwh()


def sum_profiles(grid: TimeGrid, profiles) -> PowerProfile:
    total = PowerProfile.empty(grid)
    for p in profiles:
        total = total.add(p)
    return total


def round_half_even(numerator: int, denominator: int) -> int:
    """Round numerator/denominator to the nearest integer, ties to even.

    Exact integer implementation of banker's rounding; denominator > 0.
    """
    if denominator <= 0:
        raise ValueError("denominator must be positive")
    if numerator < 0:
        return -round_half_even(-numerator, denominator)
    q, r = divmod(numerator, denominator)
    twice = 2 * r
    if twice > denominator or (twice == denominator and q % 2 == 1):
        return q + 1
    return q


def ceil_div(numerator: int, denominator: int) -> int:
    if denominator <= 0:
        raise ValueError("denominator must be positive")
    return -((-numerator) // denominator)


def credit_cents(rate_ct_per_kwh: int, energy_mwmin: int) -> int:
    """Incentive credit for delivered energy, rounded half-to-even to cents."""
    return round_half_even(rate_ct_per_kwh * energy_mwmin, MWMIN_PER_KWH)


def format_eur(cents: int) -> str:
    sign = "-" if cents < 0 else ""
    cents = abs(cents)
    return f"{sign}€{cents // 100}.{cents % 100:02d}"
