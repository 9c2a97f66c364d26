"""EV-charging instance: charger dynamics, stage reward and the transformer limit.

A charger is ``(remaining, lead_time)`` in stages. Charging is binary at a
constant rate, so one active stage serves ``R * stage_hours`` kWh.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import InvalidInputError


@dataclass(frozen=True)
class FacilityConfig:
    charger_count: int
    charging_rate: float  # kW
    max_simultaneous: int

    def __post_init__(self) -> None:
        if self.charging_rate <= 0:
            raise InvalidInputError("charging rate must be positive")
        if not 1 <= self.max_simultaneous < self.charger_count:
            raise InvalidInputError("need 1 <= max_simultaneous < charger_count")

    def stage_energy(self, stage_hours: float) -> float:
        """kWh delivered by one charger in one stage."""
        return self.charging_rate * stage_hours


@dataclass(frozen=True)
class PriceConfig:
    """Prices in $/kWh. ``energy_prices`` has one entry per stage."""

    reward_price: float
    energy_prices: tuple[float, ...]
    penalty_price: float

    def __post_init__(self) -> None:
        prices = tuple(float(p) for p in self.energy_prices)
        object.__setattr__(self, "energy_prices", prices)
        values = (self.reward_price, self.penalty_price) + prices
        if not all(math.isfinite(v) for v in values):
            raise InvalidInputError("prices must be finite")
        if prices and self.penalty_price < max(prices):
            raise InvalidInputError("penalty price must be >= every energy price")

    def energy_price(self, t: int) -> float:
        if not 0 <= t < len(self.energy_prices):
            raise InvalidInputError(f"stage {t} outside the price series (length {len(self.energy_prices)})")
        return self.energy_prices[t]


@dataclass(frozen=True)
class ChargerState:
    remaining: int = 0
    lead_time: int = 0

    def __post_init__(self) -> None:
        if self.remaining < 0 or self.lead_time < 0:
            raise InvalidInputError(f"negative charger state {self}")

    @property
    def idle(self) -> bool:
        return self.lead_time == 0

    @property
    def serviceable(self) -> bool:
        return self.remaining >= 1 and self.lead_time >= 1


IDLE = ChargerState(0, 0)


def demand_to_stages(energy_kwh: float, stage_energy_kwh: float) -> int:
    """Stages of charging needed for ``energy_kwh``, rounded up.

    The ratio is rounded to 9 decimals first so exact multiples do not pick
    up an extra stage from float noise.
    """
    return max(1, math.ceil(round(energy_kwh / stage_energy_kwh, 9)))


def minutes_to_stages(minutes: float, stage_minutes: float) -> int:
    return max(1, math.ceil(round(minutes / stage_minutes, 9)))


def step_charger(x: ChargerState, u: int, arrival=None) -> ChargerState:
    """Advance one charger by a stage.

    ``arrival`` is the EV (anything with ``demand_stages`` and
    ``deadline_stages``) that shows up at this charger at the next stage;
    it only takes effect if the charger frees up.
    """
    if u not in (0, 1):
        raise InvalidInputError(f"control must be 0 or 1, got {u}")
    if u and not x.serviceable:
        raise InvalidInputError(f"cannot charge idle or completed charger {x}")
    if x.lead_time > 1:
        return ChargerState(x.remaining - u, x.lead_time - 1)
    if arrival is not None:
        return ChargerState(arrival.demand_stages, arrival.deadline_stages)
    return IDLE


@dataclass(frozen=True)
class StageReward:
    service: float
    energy: float
    penalty: float

    @property
    def total(self) -> float:
        return self.service - self.energy - self.penalty


def stage_reward(
    states: Sequence[ChargerState],
    controls: Sequence[int],
    t: int,
    prices: PriceConfig,
    facility: FacilityConfig,
    stage_minutes: float,
) -> StageReward:
    """Service revenue, energy cost and departure penalty of one stage.

    EVs with lead time 1 leave after this stage; whatever they still need
    after this stage's charging is billed at the penalty price.
    """
    energy_per_stage = facility.stage_energy(stage_minutes / 60.0)
    price = prices.energy_price(t)
    active = int(sum(controls))
    unmet = sum(x.remaining - u for x, u in zip(states, controls) if x.lead_time == 1)
    return StageReward(
        service=energy_per_stage * prices.reward_price * active,
        energy=energy_per_stage * price * active,
        penalty=energy_per_stage * prices.penalty_price * unmet,
    )


@dataclass(frozen=True)
class Violation:
    kind: str  # "capacity" | "idle-activation" | "bad-control"
    charger: Optional[int]
    detail: str


def check_feasible(
    controls: Sequence[int], states: Sequence[ChargerState], facility: FacilityConfig
) -> list[Violation]:
    """All violations of the transformer limit and activation rules; empty if ok."""
    out: list[Violation] = []
    if len(controls) != len(states):
        out.append(Violation("bad-control", None, f"{len(controls)} controls for {len(states)} chargers"))
        return out
    for i, (u, x) in enumerate(zip(controls, states)):
        if u not in (0, 1):
            out.append(Violation("bad-control", i, f"control {u!r} is not binary"))
        elif u and not x.serviceable:
            out.append(Violation("idle-activation", i, f"charger {i} activated in state {x}"))
    active = sum(1 for u in controls if u == 1)
    if active > facility.max_simultaneous:
        out.append(Violation("capacity", None, f"{active} active > limit {facility.max_simultaneous}"))
    return out


def total_consumption(controls: Sequence[int], facility: FacilityConfig) -> float:
    return facility.charging_rate * int(sum(controls))


def laxity(x: ChargerState) -> int:
    """Stages the EV can still sit idle; negative means it cannot finish."""
    if x.remaining < 1:
        raise InvalidInputError(f"laxity undefined for unoccupied charger {x}")
    return x.lead_time - x.remaining


def states_array(states: Sequence[ChargerState]) -> np.ndarray:
    return np.array([(x.remaining, x.lead_time) for x in states], dtype=int).reshape(-1, 2)
