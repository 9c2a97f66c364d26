"""MILP formulations of the EV scheduling problem.

Every formulation shares one skeleton: a binary ``u_<charger>_<stage>`` for
each stage an EV with unmet demand is plugged in, a per-EV cap on served
stages, the per-stage transformer limit, and rows that tie a peak variable
to each measurement window. Peak-type variables are kept in *stage units*
(number of charger-stages in one window), so a window average in kW is
``R / l`` times the variable; that keeps them integral whenever the
tracked peak is, which lets branch and bound fix them in a couple of nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from ..core import HorizonConfig, InvalidInputError, PeakTracker, TariffConfig, TerminalCostKind
from ..ev_model import IDLE, ChargerState, FacilityConfig, PriceConfig, step_charger
from ..scenario import ArrivalEvent, Forecast, Scenario
from .milp import MilpProblem, MilpSolution, Status
from .solver import SolveLimits, solve


@dataclass(frozen=True)
class Job:
    """One EV as seen by a planning problem: on ``charger`` for stages ``[start, end)``."""

    charger: int
    start: int
    end: int
    remaining: int


def collect_jobs(
    states: Sequence[ChargerState], t: int, events: Iterable[ArrivalEvent], t_end: int
) -> list[Job]:
    """EVs present during ``[t, t_end)``: current occupants plus arrivals.

    An arrival is dropped if its charger is still busy at that stage, which
    also discards events already folded into ``states``.
    """
    jobs = []
    busy_until = [0] * len(states)
    for i, x in enumerate(states):
        if not x.idle:
            jobs.append(Job(i, t, t + x.lead_time, x.remaining))
            busy_until[i] = t + x.lead_time
    for ev in sorted(events):
        if not t <= ev.stage < t_end:
            continue
        if busy_until[ev.charger] > ev.stage:
            continue
        jobs.append(Job(ev.charger, ev.stage, ev.departure, ev.demand_stages))
        busy_until[ev.charger] = ev.departure
    jobs.sort(key=lambda j: (j.start, j.charger))
    return jobs


def _integral(v: float) -> bool:
    return abs(v - round(v)) <= 1e-9


def to_stage_units(kw: float, facility: FacilityConfig, horizon: HorizonConfig) -> float:
    return kw * horizon.window_size / facility.charging_rate


def to_kw(units: float, facility: FacilityConfig, horizon: HorizonConfig) -> float:
    return units * facility.charging_rate / horizon.window_size


class _Window:
    """Shared skeleton for one planning window ``[t0, t1)``."""

    def __init__(self, kind: str, jobs: Sequence[Job], t0: int, t1: int,
                 facility: FacilityConfig, prices: PriceConfig, horizon: HorizonConfig):
        self.problem = MilpProblem(metadata={"kind": kind, "t0": t0, "t1": t1})
        self.t0, self.t1 = t0, t1
        self.facility, self.horizon = facility, horizon
        energy = facility.stage_energy(horizon.stage_hours)
        self.by_stage: dict[int, list[int]] = {s: [] for s in range(t0, t1)}
        self.by_job: dict[Job, list[int]] = {}
        p = self.problem
        for job in jobs:
            stages = range(max(job.start, t0), min(job.end, t1))
            departs = job.end <= t1
            idx = []
            if job.remaining >= 1:
                for s in stages:
                    coef = energy * (prices.reward_price - prices.energy_price(s))
                    if departs:
                        coef += energy * prices.penalty_price
                    j = p.add_binary(f"u_{job.charger}_{s}", coef)
                    idx.append(j)
                    self.by_stage[s].append(j)
                if len(idx) > job.remaining:
                    p.add_constraint({j: 1.0 for j in idx}, "<=", job.remaining,
                                     f"need_{job.charger}_{job.start}")
            if departs:
                p.objective_constant -= energy * prices.penalty_price * job.remaining
            self.by_job[job] = idx
        for s in range(t0, t1):
            if len(self.by_stage[s]) > facility.max_simultaneous:
                p.add_constraint({j: 1.0 for j in self.by_stage[s]}, "<=",
                                 facility.max_simultaneous, f"cap_{s}")

    @property
    def has_controls(self) -> bool:
        return any(self.by_stage.values())

    def window_sums(self, prior_units: float = 0.0) -> list[tuple[int, list[int], float]]:
        """(window start, control indices, already-served units) for each
        measurement window that overlaps the planning window."""
        ell = self.horizon.window_size
        out = []
        first = (self.t0 // ell) * ell
        for w in range(first, self.t1, ell):
            idx = [j for s in range(max(w, self.t0), min(w + ell, self.t1)) for j in self.by_stage[s]]
            prior = prior_units if w < self.t0 else 0.0
            out.append((w, idx, prior))
        return out

    def add_peak(self, name: str, floor_units: float, cost_per_unit: float,
                 prior_units: float = 0.0, excess: bool = False) -> int:
        """A variable that dominates every window sum and ``floor_units``.

        With ``excess`` the variable measures only the amount by which the
        windows exceed ``floor_units`` (so its lower bound is 0).
        """
        ell = self.horizon.window_size
        cap = float(self.facility.max_simultaneous * ell)
        sums = self.window_sums(prior_units)
        const_floor = max([floor_units] + [prior for _, idx, prior in sums if not idx])
        integer = _integral(floor_units) and _integral(prior_units)
        shift = floor_units if excess else 0.0
        lb = max(0.0, const_floor - shift)
        ub = max(lb, cap + prior_units - shift)
        v = self.problem.add_variable(name, lb, ub, integer, -cost_per_unit, priority=1)
        for w, idx, prior in sums:
            if not idx:
                continue
            coeffs = {j: 1.0 for j in idx}
            coeffs[v] = -1.0
            self.problem.add_constraint(coeffs, "<=", shift - prior, f"win_{w}")
        return v


def _kw_price(tariff: TariffConfig, facility: FacilityConfig, horizon: HorizonConfig) -> float:
    """Demand charge per stage unit of window sum."""
    return tariff.demand_charge_price * facility.charging_rate / horizon.window_size


# --- upper bound -------------------------------------------------------------

def build_upper_bound(
    scenario: Scenario, facility: FacilityConfig, prices: PriceConfig,
    horizon: HorizonConfig, tariff: TariffConfig,
) -> MilpProblem:
    """Hindsight-optimal schedule for a realized scenario (full horizon)."""
    jobs = collect_jobs([IDLE] * facility.charger_count, 0, scenario.events, horizon.horizon)
    win = _Window("upper_bound", jobs, 0, horizon.horizon, facility, prices, horizon)
    win.add_peak("peak", 0.0, _kw_price(tariff, facility, horizon))
    return win.problem


# --- rolling-window problems -------------------------------------------------

def _window_jobs(states, t: int, forecast: Forecast, t1: int) -> list[Job]:
    if forecast.start > t or forecast.end < t1:
        raise InvalidInputError(
            f"forecast [{forecast.start}, {forecast.end}) does not cover window [{t}, {t1})"
        )
    return collect_jobs(states, t, forecast.events, t1)


def build_bmpc(
    states: Sequence[ChargerState], tracker: PeakTracker, forecast: Forecast, t: int,
    facility: FacilityConfig, prices: PriceConfig, horizon: HorizonConfig, tariff: TariffConfig,
) -> MilpProblem:
    """Block problem solved at a window start ``t``.

    INCREMENTAL uses ``delta >= window sum - phi`` (stage units) priced at
    the demand charge; FULL and AVERAGED price ``max(phi, window sums)``
    itself, the latter scaled by W/T.
    """
    if not horizon.is_window_start(t):
        raise InvalidInputError(f"block problems start on window boundaries, got t={t}")
    t1 = horizon.window_end(t)
    win = _Window("bmpc", _window_jobs(states, t, forecast, t1), t, t1, facility, prices, horizon)
    phi_units = to_stage_units(tracker.phi, facility, horizon)
    price = _kw_price(tariff, facility, horizon)
    kind = tariff.terminal_cost_kind
    if kind is TerminalCostKind.INCREMENTAL:
        win.add_peak("delta", phi_units, price, excess=True)
    elif kind is TerminalCostKind.FULL:
        win.add_peak("peak", phi_units, price)
    elif kind is TerminalCostKind.AVERAGED:
        win.add_peak("peak", phi_units, price * horizon.rolling_window / horizon.horizon)
    win.problem.metadata["terminal_cost"] = kind.value
    return win.problem


def build_nmpc(
    states: Sequence[ChargerState], forecast: Forecast, t: int,
    facility: FacilityConfig, prices: PriceConfig, horizon: HorizonConfig,
) -> MilpProblem:
    """Rolling-window problem without any demand-charge term."""
    t1 = min(t + horizon.rolling_window, horizon.horizon)
    win = _Window("nmpc", _window_jobs(states, t, forecast, t1), t, t1, facility, prices, horizon)
    return win.problem


# --- reference trajectories and EMPC ----------------------------------------

@dataclass
class ReferenceTrajectory:
    """A full-horizon schedule for EMPC to track.

    ``remaining_peaks[t]`` is the highest window average among windows that
    open at or after ``t`` (with ``remaining_peaks[T] = 0``).
    """

    events: tuple[ArrivalEvent, ...]
    controls: np.ndarray  # (T, N) int
    states: list[list[ChargerState]]  # T x N
    consumption: np.ndarray  # (T,) kW
    psi: float
    remaining_peaks: np.ndarray  # (T + 1,) kW
    objective: float = 0.0


def decode_controls(problem: MilpProblem, solution: MilpSolution, charger_count: int) -> np.ndarray:
    """Control matrix for stages ``[t0, t1)`` from ``u_<i>_<s>`` variables."""
    t0, t1 = problem.metadata["t0"], problem.metadata["t1"]
    u = np.zeros((t1 - t0, charger_count), dtype=np.int64)
    if solution.values is None:
        return u
    for name, v in zip(solution.names, solution.values):
        if name.startswith("u_") and v > 0.5:
            _, i, s = name.split("_")
            u[int(s) - t0, int(i)] = 1
    return u


def rollout_states(events: Iterable[ArrivalEvent], controls: np.ndarray) -> list[list[ChargerState]]:
    """States at each stage when ``controls`` are applied from an empty facility."""
    T, N = controls.shape
    arrivals: dict[int, dict[int, ArrivalEvent]] = {}
    for ev in events:
        arrivals.setdefault(ev.stage, {})[ev.charger] = ev
    x = [IDLE] * N
    for i, ev in arrivals.get(0, {}).items():
        x[i] = ChargerState(ev.demand_stages, ev.deadline_stages)
    out = []
    for t in range(T):
        out.append(list(x))
        nxt = arrivals.get(t + 1, {})
        x = [step_charger(x[i], int(controls[t, i]), nxt.get(i)) for i in range(N)]
    return out


def remaining_window_peaks(consumption: Sequence[float], horizon: HorizonConfig) -> np.ndarray:
    ell, T = horizon.window_size, horizon.horizon
    averages = [sum(consumption[w:w + ell]) / ell for w in range(0, T, ell)]
    out = np.zeros(T + 1)
    running = 0.0
    for t in range(T - 1, -1, -1):
        if t % ell == 0:
            running = max(running, averages[t // ell])
        out[t] = running
    return out


def build_reference(
    scenario: Scenario, facility: FacilityConfig, prices: PriceConfig,
    horizon: HorizonConfig, tariff: TariffConfig, limits: Optional[SolveLimits] = None,
) -> ReferenceTrajectory:
    """Solve the deterministic full-horizon problem on ``scenario`` and
    extract the trajectory and its peak profile."""
    problem = build_upper_bound(scenario, facility, prices, horizon, tariff)
    solution = solve(problem, limits)
    if solution.values is None or solution.status is Status.INFEASIBLE:
        raise RuntimeError(f"reference problem not solved: {solution.status.value}")
    controls = decode_controls(problem, solution, facility.charger_count)
    consumption = controls.sum(axis=1) * facility.charging_rate
    peaks = remaining_window_peaks(consumption, horizon)
    states = rollout_states(scenario.events, controls)
    return ReferenceTrajectory(tuple(scenario.events), controls, states,
                               consumption.astype(float), float(peaks[0]), peaks, solution.objective)


def build_empc(
    states: Sequence[ChargerState], tracker: PeakTracker, reference: ReferenceTrajectory, t: int,
    facility: FacilityConfig, prices: PriceConfig, horizon: HorizonConfig, tariff: TariffConfig,
    terminal_weight: Optional[float] = None,
) -> MilpProblem:
    """Economic MPC window at any stage ``t``, driven by the reference inputs.

    The demand-charge term prices ``max(phi, window averages, remaining
    reference peak)``; the open window's already-served energy counts toward
    its average. The terminal state constraint is an L1 penalty on the
    remaining demand of chargers occupied in both the plan and the
    reference at ``t + W``.
    """
    if reference is None:
        raise InvalidInputError("EMPC needs a reference trajectory")
    t1 = min(t + horizon.rolling_window, horizon.horizon)
    jobs = collect_jobs(states, t, reference.events, t1)
    win = _Window("empc", jobs, t, t1, facility, prices, horizon)
    p = win.problem
    price = _kw_price(tariff, facility, horizon)
    phi_units = to_stage_units(tracker.phi, facility, horizon)
    tail_units = to_stage_units(float(reference.remaining_peaks[t1]), facility, horizon)
    prior_units = tracker.window_accumulator / facility.charging_rate
    win.add_peak("peak", max(phi_units, tail_units), price, prior_units=prior_units)
    p.objective_constant -= tariff.demand_charge_price * reference.psi
    p.metadata["reference_charge"] = tariff.demand_charge_price * reference.psi

    if t1 < horizon.horizon:
        rho = default_terminal_weight(facility, prices, horizon, tariff) if terminal_weight is None else terminal_weight
        ref_states = reference.states[t1]
        for job in jobs:
            if job.end <= t1 or ref_states[job.charger].idle:
                continue
            r_ref = ref_states[job.charger].remaining
            idx = win.by_job[job]
            if not idx:
                p.objective_constant -= rho * abs(job.remaining - r_ref)
                continue
            d = p.add_variable(f"dev_{job.charger}", 0.0, np.inf, False, -rho)
            plus = {j: -1.0 for j in idx}
            plus[d] = -1.0
            p.add_constraint(plus, "<=", r_ref - job.remaining, f"devp_{job.charger}")
            minus = {j: 1.0 for j in idx}
            minus[d] = -1.0
            p.add_constraint(minus, "<=", job.remaining - r_ref, f"devm_{job.charger}")
    return p


def default_terminal_weight(facility: FacilityConfig, prices: PriceConfig,
                            horizon: HorizonConfig, tariff: TariffConfig) -> float:
    """Per-stage weight on terminal deviation from the reference.

    Chosen above the most one stage of remaining demand can be worth inside
    a window (reward, avoided penalty and one unit of peak), so the soft
    constraint binds whenever the reference state is reachable.
    """
    energy = facility.stage_energy(horizon.stage_hours)
    spread = abs(prices.reward_price) + max((abs(p) for p in prices.energy_prices), default=0.0)
    per_stage = energy * (spread + prices.penalty_price)
    return per_stage + _kw_price(tariff, facility, horizon) + 1.0
