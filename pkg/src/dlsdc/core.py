"""Timescales, peak tracking, tariffs and terminal costs for deferrable-load
scheduling under a demand charge.

Nothing in here knows about EVs. Stages are integers ``0 .. T-1``; a
measurement window covers ``window_size`` consecutive stages and the
demand charge is levied once, on the highest completed window average.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Protocol, Sequence


class InvalidInputError(ValueError):
    """Raised when an operation receives arguments outside its contract."""


class TerminalCostKind(str, enum.Enum):
    FULL = "full"
    AVERAGED = "averaged"
    INCREMENTAL = "incremental"
    NONE = "none"

    @classmethod
    def parse(cls, value: "str | TerminalCostKind") -> "TerminalCostKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("charge", "").replace("_", "").replace("-", "")
        for kind in cls:
            if kind.value == key:
                return kind
        raise InvalidInputError(f"unknown terminal cost kind {value!r}")


@dataclass(frozen=True)
class HorizonConfig:
    """Stage length, measurement window, rolling window and billing horizon.

    ``rolling_window`` and ``horizon`` are counted in stages and must both be
    multiples of ``window_size`` so that planning blocks line up with
    measurement windows.
    """

    stage_length_minutes: float
    window_size: int
    rolling_window: int
    horizon: int

    def __post_init__(self) -> None:
        if self.stage_length_minutes <= 0:
            raise InvalidInputError("stage length must be positive")
        if self.window_size < 1:
            raise InvalidInputError("window_size must be >= 1")
        if self.rolling_window < self.window_size:
            raise InvalidInputError("rolling_window must be >= window_size")
        if self.horizon < self.rolling_window:
            raise InvalidInputError("horizon must be >= rolling_window")
        if self.horizon % self.window_size:
            raise InvalidInputError("horizon must be a multiple of window_size")
        if self.rolling_window % self.window_size:
            raise InvalidInputError("rolling_window must be a multiple of window_size")

    @property
    def stage_hours(self) -> float:
        return self.stage_length_minutes / 60.0

    @property
    def window_starts(self) -> range:
        """Stages at which a measurement window opens: 0, l, 2l, ..., T-l."""
        return range(0, self.horizon, self.window_size)

    @property
    def window_ends(self) -> range:
        """Stages at which a measurement window has just closed: l, 2l, ..., T."""
        return range(self.window_size, self.horizon + 1, self.window_size)

    def is_window_start(self, stage: int) -> bool:
        return 0 <= stage < self.horizon and stage % self.window_size == 0

    def is_window_end(self, stage: int) -> bool:
        return self.window_size <= stage <= self.horizon and stage % self.window_size == 0

    def window_end(self, stage: int) -> int:
        """End (exclusive) of the rolling window opened at ``stage``, truncated at T."""
        return min(stage + self.rolling_window, self.horizon)

    def with_rolling_window(self, rolling_window: int) -> "HorizonConfig":
        return replace(self, rolling_window=rolling_window)


@dataclass(frozen=True)
class TariffConfig:
    demand_charge_price: float
    terminal_cost_kind: TerminalCostKind = TerminalCostKind.INCREMENTAL
    initial_peak: float = 0.0

    def __post_init__(self) -> None:
        if self.demand_charge_price < 0:
            raise InvalidInputError("demand charge price must be nonnegative")
        if self.initial_peak < 0:
            raise InvalidInputError("initial peak must be nonnegative")
        object.__setattr__(self, "terminal_cost_kind", TerminalCostKind.parse(self.terminal_cost_kind))


@dataclass(frozen=True)
class PeakTracker:
    """Running maximum of completed window averages.

    ``window_accumulator`` holds the kW-stage sum of the window that is
    currently open and ``stages_in_window`` how many of its stages have been
    seen.
    """

    phi: float = 0.0
    window_accumulator: float = 0.0
    stages_in_window: int = 0


def update_peak_tracker(
    tracker: PeakTracker, stage_consumption: float, next_stage: int, horizon: HorizonConfig
) -> PeakTracker:
    """Fold one stage of consumption into the tracker.

    ``next_stage`` is ``t + 1`` for the stage just served. The window is
    closed when ``next_stage`` lands on a window end (``l, 2l, ..., T``), so
    the final window is counted and ``phi`` at ``T`` is the billed peak.
    """
    if stage_consumption < 0:
        raise InvalidInputError(f"negative consumption {stage_consumption}")
    if next_stage < 1 or next_stage > horizon.horizon:
        raise InvalidInputError(f"next_stage {next_stage} outside 1..{horizon.horizon}")
    acc = tracker.window_accumulator + stage_consumption
    if horizon.is_window_end(next_stage):
        return PeakTracker(max(tracker.phi, acc / horizon.window_size), 0.0, 0)
    return PeakTracker(tracker.phi, acc, tracker.stages_in_window + 1)


def demand_charge(psi: float, tariff: TariffConfig) -> float:
    if psi < 0:
        raise InvalidInputError("peak must be nonnegative")
    return tariff.demand_charge_price * psi


def window_averages(trace: Sequence[float], window_size: int) -> list[float]:
    """Average of each non-overlapping window, summed left to right."""
    if len(trace) % window_size:
        raise InvalidInputError(
            f"trace length {len(trace)} is not a multiple of window size {window_size}"
        )
    out = []
    for start in range(0, len(trace), window_size):
        acc = 0.0
        for c in trace[start:start + window_size]:
            acc += c
        out.append(acc / window_size)
    return out


def realized_peak(trace: Sequence[float], horizon: HorizonConfig) -> float:
    """Highest measurement-window average of a consumption trace (kW)."""
    if len(trace) != horizon.horizon:
        if len(trace) % horizon.window_size:
            raise InvalidInputError("trace length not a multiple of the window size")
        raise InvalidInputError(f"trace length {len(trace)} != horizon {horizon.horizon}")
    if any(c < 0 for c in trace):
        raise InvalidInputError("consumption must be nonnegative")
    averages = window_averages(trace, horizon.window_size)
    return max(averages, default=0.0)


def terminal_cost(
    kind: TerminalCostKind | str,
    phi_end: float,
    phi_start: float,
    horizon: HorizonConfig,
    tariff: TariffConfig,
) -> float:
    """Surrogate end-of-window cost for the demand charge.

    FULL bills the whole demand charge on every rolling window, AVERAGED
    prorates it by W/T and INCREMENTAL bills only the rise of the tracked
    peak over the window.
    """
    kind = TerminalCostKind.parse(kind)
    if phi_start < 0 or phi_end < phi_start:
        raise InvalidInputError(f"peak cannot decrease ({phi_start} -> {phi_end})")
    price = tariff.demand_charge_price
    if kind is TerminalCostKind.FULL:
        return price * phi_end
    if kind is TerminalCostKind.AVERAGED:
        return horizon.rolling_window / horizon.horizon * price * phi_end
    if kind is TerminalCostKind.INCREMENTAL:
        return price * (phi_end - phi_start)
    return 0.0


def revised_stage_reward(
    stage_reward: float, phi_next: float, phi_now: float, tariff: TariffConfig
) -> float:
    """Stage reward net of the demand charge accrued by raising the peak."""
    if phi_next < phi_now:
        raise InvalidInputError("peak cannot decrease")
    return stage_reward - tariff.demand_charge_price * (phi_next - phi_now)


class Policy(Protocol):
    """A decision rule mapping the observed state at stage ``t`` to controls.

    Implementations must return control vectors that pass the model's
    feasibility check against the state they were given.
    """

    name: str

    def act(self, t: int, states: Sequence, tracker: PeakTracker) -> list[int]: ...
