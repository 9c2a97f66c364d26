"""Exogenous inputs: EV arrivals, energy prices and forecasts of both."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import HorizonConfig, InvalidInputError
from .ev_model import ChargerState, FacilityConfig, demand_to_stages, minutes_to_stages


@dataclass(frozen=True)
class ArrivalConfig:
    """Poisson arrivals per stage with uniform demand and deadline.

    If ``alt_bernoulli_p`` is set, arrivals instead follow the per-charger
    model: every idle charger becomes occupied with that probability at
    each stage.
    """

    arrival_rate: float
    max_demand: float  # kWh
    max_deadline: float  # minutes
    alt_bernoulli_p: Optional[float] = None

    def __post_init__(self) -> None:
        if self.arrival_rate < 0:
            raise InvalidInputError("arrival rate must be nonnegative")
        if self.max_demand <= 0:
            raise InvalidInputError("max demand must be positive")
        if self.alt_bernoulli_p is not None and not 0 <= self.alt_bernoulli_p <= 1:
            raise InvalidInputError("bernoulli probability must be in [0, 1]")


@dataclass(frozen=True, order=True)
class ArrivalEvent:
    stage: int
    charger: int
    demand_stages: int
    deadline_stages: int

    def __post_init__(self) -> None:
        if self.demand_stages < 1 or self.deadline_stages < 1:
            raise InvalidInputError(f"arrival needs positive demand and deadline: {self}")

    @property
    def departure(self) -> int:
        """First stage at which the charger is free again."""
        return self.stage + self.deadline_stages


@dataclass(frozen=True)
class Scenario:
    seed: Optional[int]
    horizon: int
    events: tuple[ArrivalEvent, ...]
    rejected: int = 0
    prices: tuple[float, ...] = ()
    scenario_id: str = ""

    def arrivals_by_stage(self) -> dict[int, dict[int, ArrivalEvent]]:
        out: dict[int, dict[int, ArrivalEvent]] = {}
        for ev in self.events:
            out.setdefault(ev.stage, {})[ev.charger] = ev
        return out

    def validate(self, charger_count: int) -> None:
        """Check that no charger hosts two EVs at once."""
        busy_until = [0] * charger_count
        for ev in sorted(self.events):
            if not 0 <= ev.charger < charger_count:
                raise InvalidInputError(f"charger index out of range in {ev}")
            if not 0 <= ev.stage < self.horizon:
                raise InvalidInputError(f"arrival stage out of range in {ev}")
            if busy_until[ev.charger] > ev.stage:
                raise InvalidInputError(f"charger {ev.charger} still occupied at {ev}")
            busy_until[ev.charger] = ev.departure


def _draw_half_open(rng: np.random.Generator, upper: float) -> float:
    # rng.random() is in [0, 1); flipping gives (0, upper]
    return upper * (1.0 - rng.random())


def generate_scenario(
    seed: int,
    arrival: ArrivalConfig,
    facility: FacilityConfig,
    horizon: HorizonConfig,
    prices: Sequence[float] = (),
    scenario_id: str = "",
) -> Scenario:
    """Sample one arrival trajectory. Same seed, same scenario.

    Each arrival picks an idle charger uniformly at random; if every
    charger is busy it is counted as rejected.
    """
    rng = np.random.default_rng(seed)
    stage_energy = facility.stage_energy(horizon.stage_hours)
    busy_until = np.zeros(facility.charger_count, dtype=np.int64)
    events: list[ArrivalEvent] = []
    rejected = 0

    def draw_ev(t: int, charger: int) -> ArrivalEvent:
        demand = _draw_half_open(rng, arrival.max_demand)
        deadline = _draw_half_open(rng, arrival.max_deadline)
        return ArrivalEvent(
            t,
            charger,
            demand_to_stages(demand, stage_energy),
            minutes_to_stages(deadline, horizon.stage_length_minutes),
        )

    for t in range(horizon.horizon):
        if arrival.alt_bernoulli_p is not None:
            idle = np.flatnonzero(busy_until <= t)
            flips = rng.random(idle.size) < arrival.alt_bernoulli_p
            for i in idle[flips]:
                ev = draw_ev(t, int(i))
                events.append(ev)
                busy_until[i] = ev.departure
            continue
        for _ in range(int(rng.poisson(arrival.arrival_rate))):
            idle = np.flatnonzero(busy_until <= t)
            if idle.size == 0:
                rejected += 1
                continue
            charger = int(idle[rng.integers(idle.size)])
            ev = draw_ev(t, charger)
            events.append(ev)
            busy_until[charger] = ev.departure
    return Scenario(seed, horizon.horizon, tuple(events), rejected, tuple(prices), scenario_id)


# --- prices -----------------------------------------------------------------

def load_prices(path: str | Path, horizon: HorizonConfig) -> tuple[float, ...]:
    """Read hourly prices in $/MWh and expand them to $/kWh per stage.

    The file has a header ``timestamp,price_dollars_per_mwh`` and ISO-8601
    timestamps that must be strictly consecutive hours. Extra rows past the
    horizon are ignored.
    """
    if 60 % horizon.stage_length_minutes:
        raise InvalidInputError("stage length must divide an hour to expand hourly prices")
    per_hour = int(60 // horizon.stage_length_minutes)
    hours_needed = math.ceil(horizon.horizon / per_hour)
    rows: list[tuple[datetime, float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["timestamp", "price_dollars_per_mwh"]:
            raise InvalidInputError(f"{path}: expected header 'timestamp,price_dollars_per_mwh'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise InvalidInputError(f"{path}:{lineno}: malformed row {row!r}")
            try:
                stamp = datetime.fromisoformat(row[0].strip())
                price = float(row[1])
            except ValueError as exc:
                raise InvalidInputError(f"{path}:{lineno}: malformed row {row!r}") from exc
            if not math.isfinite(price):
                raise InvalidInputError(f"{path}:{lineno}: non-finite price")
            if rows:
                gap = stamp - rows[-1][0]
                if gap <= timedelta(0):
                    raise InvalidInputError(f"{path}:{lineno}: timestamps not increasing")
                if gap != timedelta(hours=1):
                    raise InvalidInputError(f"{path}:{lineno}: missing hours before {row[0]}")
            rows.append((stamp, price))
    if len(rows) < hours_needed:
        raise InvalidInputError(
            f"{path}: {len(rows)} hourly rows cover less than the {hours_needed} hours needed"
        )
    stage_prices = [p / 1000.0 for _, p in rows[:hours_needed] for _ in range(per_hour)]
    return tuple(stage_prices[: horizon.horizon])


def sample_prices_path() -> Path:
    """A bundled one-day hourly price profile (synthetic, day-ahead-market shaped)."""
    return Path(__file__).parent / "data" / "sample_prices.csv"


# --- forecasts --------------------------------------------------------------

@dataclass(frozen=True)
class Forecast:
    """Predicted arrivals on stages ``[start, start + length)``.

    ``occupants`` are EVs already plugged in at ``start`` (known exactly
    once they arrive); perfect forecasts leave it empty and rely on the
    realized state instead.
    """

    start: int
    length: int
    events: tuple[ArrivalEvent, ...]
    mode: str  # "perfect" | "mean"
    occupants: Mapping[int, ChargerState] = field(default_factory=dict)

    @property
    def end(self) -> int:
        return self.start + self.length


def perfect_forecast(scenario: Scenario, t: int, length: int) -> Forecast:
    if length < 0 or t < 0 or t + length > scenario.horizon:
        raise InvalidInputError(f"forecast window [{t}, {t + length}) outside horizon {scenario.horizon}")
    events = tuple(ev for ev in scenario.events if t <= ev.stage < t + length)
    return Forecast(t, length, events, "perfect")


def mean_arrival_shape(arrival: ArrivalConfig, facility: FacilityConfig, horizon: HorizonConfig) -> tuple[int, int, int]:
    """(arrivals per stage, demand stages, deadline stages) of the certainty-equivalent EV."""
    count = int(math.floor(arrival.arrival_rate + 0.5))
    demand = demand_to_stages(arrival.max_demand / 2.0, facility.stage_energy(horizon.stage_hours))
    deadline = minutes_to_stages(arrival.max_deadline / 2.0, horizon.stage_length_minutes)
    return count, demand, deadline


def mean_forecast(
    arrival: ArrivalConfig,
    occupancy: Sequence[ChargerState],
    t: int,
    length: int,
    facility: FacilityConfig,
    horizon: HorizonConfig,
) -> Forecast:
    """Certainty-equivalent forecast.

    From ``t + 1`` on, every stage gets ``round(rate)`` synthetic EVs with
    half the maximum demand and half the maximum deadline, placed on the
    lowest-indexed chargers predicted to be idle. Synthetic EVs that find
    no idle charger are dropped. Arrivals at ``t`` itself are already
    observed and live in ``occupancy``.
    """
    if length < 0 or t < 0 or t + length > horizon.horizon:
        raise InvalidInputError(f"forecast window [{t}, {t + length}) outside horizon {horizon.horizon}")
    count, demand, deadline = mean_arrival_shape(arrival, facility, horizon)
    occupants = {i: x for i, x in enumerate(occupancy) if not x.idle}
    busy_until = [t + x.lead_time if not x.idle else 0 for x in occupancy]
    events = []
    for s in range(t + 1, t + length):
        placed = 0
        for i in range(len(busy_until)):
            if placed == count:
                break
            if busy_until[i] <= s:
                events.append(ArrivalEvent(s, i, demand, deadline))
                busy_until[i] = s + deadline
                placed += 1
    return Forecast(t, length, tuple(events), "mean", occupants)


def mean_scenario(
    arrival: ArrivalConfig, facility: FacilityConfig, horizon: HorizonConfig, prices: Sequence[float] = ()
) -> Scenario:
    """Full-horizon certainty-equivalent trajectory from an empty facility.

    Unlike ``mean_forecast`` this also places arrivals at stage 0.
    """
    idle = [ChargerState()] * facility.charger_count
    count, demand, deadline = mean_arrival_shape(arrival, facility, horizon)
    first = tuple(ArrivalEvent(0, i, demand, deadline) for i in range(min(count, facility.charger_count)))
    occupancy = list(idle)
    for ev in first:
        occupancy[ev.charger] = ChargerState(demand, deadline)
    rest = mean_forecast(arrival, occupancy, 0, horizon.horizon, facility, horizon).events
    return Scenario(None, horizon.horizon, first + rest, 0, tuple(prices), "mean")


# --- serialization ----------------------------------------------------------

def save_scenario(scenario: Scenario, path: str | Path) -> None:
    """One JSON object per line: a header, then one line per arrival."""
    header = {
        "record": "scenario",
        "scenario_id": scenario.scenario_id,
        "seed": scenario.seed,
        "horizon": scenario.horizon,
        "rejected": scenario.rejected,
        "prices": list(scenario.prices),
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for ev in scenario.events:
            fh.write(json.dumps(asdict(ev), sort_keys=True) + "\n")


def load_scenario(path: str | Path) -> Scenario:
    header = None
    events = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidInputError(f"{path}:{lineno}: not JSON") from exc
            if rec.get("record") == "scenario":
                header = rec
                continue
            try:
                events.append(
                    ArrivalEvent(int(rec["stage"]), int(rec["charger"]),
                                 int(rec["demand_stages"]), int(rec["deadline_stages"]))
                )
            except KeyError as exc:
                raise InvalidInputError(f"{path}:{lineno}: missing field {exc}") from exc
    if header is None:
        raise InvalidInputError(f"{path}: no scenario header line")
    return Scenario(
        header.get("seed"),
        int(header["horizon"]),
        tuple(events),
        int(header.get("rejected", 0)),
        tuple(float(p) for p in header.get("prices", ())),
        header.get("scenario_id", ""),
    )


def scenario_from_events(events: Iterable[ArrivalEvent], horizon: int, prices: Sequence[float] = ()) -> Scenario:
    return Scenario(None, horizon, tuple(sorted(events)), 0, tuple(prices))
