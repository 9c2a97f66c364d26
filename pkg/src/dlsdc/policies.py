"""Online scheduling policies: BMPC, NMPC, EMPC and the EDF / LLF-LD index rules.

A policy is created per simulation run, told about the run with
``start`` and then asked for one control vector per stage with ``act``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .core import HorizonConfig, InvalidInputError, PeakTracker, TariffConfig, TerminalCostKind
from .ev_model import ChargerState, FacilityConfig, PriceConfig, laxity
from .optimizer.formulations import (
    ReferenceTrajectory,
    build_bmpc,
    build_empc,
    build_nmpc,
    build_reference,
    decode_controls,
)
from .optimizer.milp import MilpProblem, Status
from .optimizer.solver import SolveLimits, solve
from .scenario import ArrivalConfig, Forecast, Scenario, mean_forecast, mean_scenario, perfect_forecast

log = logging.getLogger(__name__)

POLICY_KINDS = ("bmpc", "nmpc", "empc", "edf", "llf-ld")
FORECAST_MODES = ("perfect", "mean")
REFERENCE_MODES = ("realized-optimal", "mean-reference")


class PolicyError(RuntimeError):
    """A policy could not produce a control (solver failure), with stage context."""


@dataclass(frozen=True)
class Setting:
    """Everything about a run except the realized arrivals."""

    horizon: HorizonConfig
    facility: FacilityConfig
    prices: PriceConfig
    tariff: TariffConfig
    arrival: ArrivalConfig
    limits: SolveLimits = SolveLimits()

    def with_demand_charge(self, price: float) -> "Setting":
        return replace(self, tariff=replace(self.tariff, demand_charge_price=price))

    def with_initial_peak(self, phi0: float) -> "Setting":
        return replace(self, tariff=replace(self.tariff, initial_peak=phi0))


@dataclass(frozen=True)
class PolicyConfig:
    kind: str
    forecast_mode: str = "perfect"
    terminal_cost_kind: TerminalCostKind = TerminalCostKind.INCREMENTAL
    empc_reference: str = "realized-optimal"
    # "zero", "hindsight", "historical" or a number in kW; only BMPC reads it
    initial_peak: str = "zero"

    def __post_init__(self) -> None:
        kind = self.kind.lower()
        if kind not in POLICY_KINDS:
            raise InvalidInputError(f"unknown policy {self.kind!r}; choose from {POLICY_KINDS}")
        object.__setattr__(self, "kind", kind)
        if self.forecast_mode not in FORECAST_MODES:
            raise InvalidInputError(f"forecast mode must be one of {FORECAST_MODES}")
        if self.empc_reference not in REFERENCE_MODES:
            raise InvalidInputError(f"EMPC reference mode must be one of {REFERENCE_MODES}")
        object.__setattr__(self, "terminal_cost_kind", TerminalCostKind.parse(self.terminal_cost_kind))
        if self.initial_peak not in ("zero", "hindsight", "historical"):
            try:
                if float(self.initial_peak) < 0:
                    raise ValueError
            except ValueError:
                raise InvalidInputError(f"bad initial peak setting {self.initial_peak!r}") from None

    @property
    def label(self) -> str:
        return self.kind.upper() if self.kind != "llf-ld" else "LLF-LD"

    @property
    def price_invariant(self) -> bool:
        """True if the controls never depend on the demand charge price."""
        return self.kind in ("nmpc", "edf", "llf-ld")


@dataclass
class CommittedBlock:
    start: int
    controls: np.ndarray  # (l, N) implemented prefix
    advisory: np.ndarray  # (W - l, N)

    def at(self, t: int) -> np.ndarray:
        return self.controls[t - self.start]


# --- index rules -------------------------------------------------------------

def _serviceable(states: Sequence[ChargerState]) -> list[int]:
    return [i for i, x in enumerate(states) if x.serviceable]


def _activate(order: Sequence[int], n: int, limit: int) -> list[int]:
    u = [0] * n
    for i in order[:limit]:
        u[i] = 1
    return u


def edf_step(states: Sequence[ChargerState], facility: FacilityConfig, t: int = 0) -> list[int]:
    """Serve the earliest deadlines first, lowest charger index on ties."""
    order = sorted(_serviceable(states), key=lambda i: (states[i].lead_time, i))
    return _activate(order, len(states), facility.max_simultaneous)


def llf_ld_step(states: Sequence[ChargerState], facility: FacilityConfig, t: int = 0) -> list[int]:
    """Least laxity first; equal laxity goes to the later deadline, then lowest index."""
    order = sorted(_serviceable(states), key=lambda i: (laxity(states[i]), -states[i].lead_time, i))
    return _activate(order, len(states), facility.max_simultaneous)


def repair_controls(controls: Sequence[int], states: Sequence[ChargerState]) -> tuple[list[int], int]:
    """Switch off planned charging on chargers that have nothing to serve.

    Never switches anything on, so the transformer limit is preserved.
    """
    out = []
    dropped = 0
    for u, x in zip(controls, states):
        if u and not x.serviceable:
            out.append(0)
            dropped += 1
        else:
            out.append(int(u))
    return out, dropped


# --- MPC helpers ---------------------------------------------------------------

def _has_controls(problem: MilpProblem) -> bool:
    return any(v.name.startswith("u_") for v in problem.variables)


def solve_window(problem: MilpProblem, charger_count: int, limits: SolveLimits, t: int) -> np.ndarray:
    """Solve a window problem and return its control matrix; all-zero if
    nothing in the window can be charged."""
    t0, t1 = problem.metadata["t0"], problem.metadata["t1"]
    if not _has_controls(problem):
        return np.zeros((t1 - t0, charger_count), dtype=np.int64)
    try:
        solution = solve(problem, limits)
    except Exception as exc:
        raise PolicyError(f"stage {t}: {problem.metadata.get('kind')} solve failed: {exc}") from exc
    if solution.values is None:
        raise PolicyError(f"stage {t}: {problem.metadata.get('kind')} solve returned {solution.status.value}")
    if solution.status is not Status.OPTIMAL:
        log.warning("stage %d: %s stopped with %s, using incumbent", t,
                    problem.metadata.get("kind"), solution.status.value)
    return decode_controls(problem, solution, charger_count)


def forecast_for(mode: str, scenario: Scenario, setting: Setting,
                 states: Sequence[ChargerState], t: int, length: int) -> Forecast:
    if mode == "perfect":
        return perfect_forecast(scenario, t, length)
    return mean_forecast(setting.arrival, states, t, length, setting.facility, setting.horizon)


def bmpc_step(states: Sequence[ChargerState], tracker: PeakTracker, forecast: Forecast,
              t: int, setting: Setting) -> CommittedBlock:
    """Solve the block problem at window start ``t`` and commit its first block."""
    h = setting.horizon
    problem = build_bmpc(states, tracker, forecast, t, setting.facility, setting.prices, h, setting.tariff)
    plan = solve_window(problem, setting.facility.charger_count, setting.limits, t)
    ell = min(h.window_size, plan.shape[0])
    return CommittedBlock(t, plan[:ell], plan[ell:])


def nmpc_step(states: Sequence[ChargerState], forecast: Forecast, t: int, setting: Setting) -> list[int]:
    problem = build_nmpc(states, forecast, t, setting.facility, setting.prices, setting.horizon)
    plan = solve_window(problem, setting.facility.charger_count, setting.limits, t)
    return repair_controls(plan[0], states)[0]


def empc_step(states: Sequence[ChargerState], tracker: PeakTracker, reference: ReferenceTrajectory,
              t: int, setting: Setting) -> list[int]:
    if reference is None:
        raise InvalidInputError("EMPC needs a reference trajectory")
    problem = build_empc(states, tracker, reference, t, setting.facility, setting.prices,
                         setting.horizon, setting.tariff)
    plan = solve_window(problem, setting.facility.charger_count, setting.limits, t)
    return repair_controls(plan[0], states)[0]


# --- policy objects ------------------------------------------------------------

class BasePolicy:
    name = "base"

    def __init__(self) -> None:
        self.deactivations = 0
        self.scenario: Optional[Scenario] = None
        self.setting: Optional[Setting] = None

    def start(self, scenario: Scenario, setting: Setting) -> None:
        self.scenario, self.setting = scenario, setting
        self.deactivations = 0

    def act(self, t: int, states: Sequence[ChargerState], tracker: PeakTracker) -> list[int]:
        raise NotImplementedError


class EDFPolicy(BasePolicy):
    name = "EDF"

    def act(self, t, states, tracker):
        return edf_step(states, self.setting.facility, t)


class LLFLDPolicy(BasePolicy):
    name = "LLF-LD"

    def act(self, t, states, tracker):
        return llf_ld_step(states, self.setting.facility, t)


class ReplayPolicy(BasePolicy):
    """Plays back a fixed control matrix (e.g. the hindsight optimum)."""

    name = "REPLAY"

    def __init__(self, controls: np.ndarray):
        super().__init__()
        self.controls = np.asarray(controls, dtype=np.int64)

    def act(self, t, states, tracker):
        return [int(v) for v in self.controls[t]]


class NMPCPolicy(BasePolicy):
    name = "NMPC"

    def __init__(self, forecast_mode: str = "perfect"):
        super().__init__()
        self.forecast_mode = forecast_mode

    def act(self, t, states, tracker):
        h = self.setting.horizon
        length = min(t + h.rolling_window, h.horizon) - t
        fc = forecast_for(self.forecast_mode, self.scenario, self.setting, states, t, length)
        return nmpc_step(states, fc, t, self.setting)


class BMPCPolicy(BasePolicy):
    """Re-plans at every window start and replays the committed block,
    repaired against the realized state, in between."""

    name = "BMPC"

    def __init__(self, forecast_mode: str = "perfect"):
        super().__init__()
        self.forecast_mode = forecast_mode
        self.block: Optional[CommittedBlock] = None
        self.blocks: list[CommittedBlock] = []

    def start(self, scenario, setting):
        super().start(scenario, setting)
        self.block = None
        self.blocks = []

    def act(self, t, states, tracker):
        h = self.setting.horizon
        if h.is_window_start(t):
            length = h.window_end(t) - t
            fc = forecast_for(self.forecast_mode, self.scenario, self.setting, states, t, length)
            self.block = bmpc_step(states, tracker, fc, t, self.setting)
            self.blocks.append(self.block)
        if self.block is None:
            raise PolicyError(f"stage {t}: no committed block (run must start on a window boundary)")
        u, dropped = repair_controls(self.block.at(t), states)
        self.deactivations += dropped
        return u


class EMPCPolicy(BasePolicy):
    name = "EMPC"

    def __init__(self, reference_mode: str = "realized-optimal",
                 reference: Optional[ReferenceTrajectory] = None):
        super().__init__()
        self.reference_mode = reference_mode
        self._given = reference
        self.reference: Optional[ReferenceTrajectory] = reference

    def start(self, scenario, setting):
        super().start(scenario, setting)
        if self._given is not None:
            self.reference = self._given
            return
        if self.reference_mode == "realized-optimal":
            ref_scenario = scenario
        else:
            ref_scenario = mean_scenario(setting.arrival, setting.facility, setting.horizon)
        self.reference = build_reference(ref_scenario, setting.facility, setting.prices,
                                         setting.horizon, setting.tariff, setting.limits)

    def act(self, t, states, tracker):
        u = empc_step(states, tracker, self.reference, t, self.setting)
        return u


def make_policy(config: PolicyConfig, reference: Optional[ReferenceTrajectory] = None) -> BasePolicy:
    if config.kind == "bmpc":
        return BMPCPolicy(config.forecast_mode)
    if config.kind == "nmpc":
        return NMPCPolicy(config.forecast_mode)
    if config.kind == "empc":
        return EMPCPolicy(config.empc_reference, reference)
    if config.kind == "edf":
        return EDFPolicy()
    return LLFLDPolicy()
