"""Upper bounds, optimality gaps and multi-scenario sweeps over demand-charge prices."""

from __future__ import annotations

import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from ..core import InvalidInputError
from ..optimizer.formulations import (
    ReferenceTrajectory,
    build_upper_bound,
    decode_controls,
    remaining_window_peaks,
    rollout_states,
)
from ..optimizer.milp import Status
from ..optimizer.solver import solve
from ..policies import PolicyConfig, Setting, make_policy
from ..scenario import Scenario, generate_scenario
from .simulate import RunReport, SimulationTrace, run_simulation

log = logging.getLogger(__name__)


@dataclass
class UpperBound:
    objective: float
    bound: float
    status: Status
    controls: np.ndarray  # (T, N)
    peak_kw: float
    nodes: int = 0

    @property
    def flag(self) -> str:
        return "" if self.status is Status.OPTIMAL else f"ub-{self.status.value}"


def solve_upper_bound(scenario: Scenario, setting: Setting) -> UpperBound:
    problem = build_upper_bound(scenario, setting.facility, setting.prices, setting.horizon, setting.tariff)
    solution = solve(problem, setting.limits)
    if solution.values is None:
        raise RuntimeError(f"upper bound for {scenario.scenario_id or scenario.seed}: {solution.status.value}")
    controls = decode_controls(problem, solution, setting.facility.charger_count)
    consumption = controls.sum(axis=1) * setting.facility.charging_rate
    peak = float(remaining_window_peaks(consumption, setting.horizon)[0])
    return UpperBound(solution.objective, solution.bound, solution.status, controls, peak, solution.nodes)


def reference_from_upper_bound(scenario: Scenario, ub: UpperBound, setting: Setting) -> ReferenceTrajectory:
    consumption = (ub.controls.sum(axis=1) * setting.facility.charging_rate).astype(float)
    peaks = remaining_window_peaks(consumption, setting.horizon)
    return ReferenceTrajectory(tuple(scenario.events), ub.controls, rollout_states(scenario.events, ub.controls),
                               consumption, float(peaks[0]), peaks, ub.objective)


def compute_gap(report: RunReport, ub: UpperBound) -> RunReport:
    """Percent shortfall against the hindsight bound.

    A bound of exactly zero makes the percentage meaningless; the absolute
    shortfall is reported instead and flagged.
    """
    flags = [ub.flag] if ub.flag else []
    value = ub.objective if ub.status is Status.OPTIMAL else ub.bound
    if value == 0:
        gap = value - report.total_reward
        flags.append("absolute-gap")
    else:
        gap = 100.0 * (value - report.total_reward) / abs(value)
    return replace(report, ub_objective=value, gap_pct=gap, gap_flag=",".join(flags))


@dataclass(frozen=True)
class SweepConfig:
    setting: Setting
    policies: tuple[PolicyConfig, ...]
    dc_prices: tuple[float, ...] = (0.0, 6.0, 9.0, 12.0, 15.0, 18.0, 21.0)
    scenarios: int = 20
    base_seed: int = 0
    history: int = 5  # held-out scenarios for the "historical" initial-peak estimate
    workers: int = 1
    record_timing: bool = False

    def __post_init__(self) -> None:
        if self.scenarios < 1:
            raise InvalidInputError("a sweep needs at least one scenario")
        if not self.policies:
            raise InvalidInputError("a sweep needs at least one policy")
        if any(p < 0 for p in self.dc_prices):
            raise InvalidInputError("demand charge prices must be nonnegative")

    def seeds(self) -> list[int]:
        return [self.base_seed + s for s in range(self.scenarios)]

    def history_seeds(self) -> list[int]:
        return [self.base_seed + 1_000_003 + k for k in range(self.history)]


def policy_label(config: PolicyConfig) -> str:
    label = config.label
    if config.kind == "bmpc" and config.terminal_cost_kind.value != "incremental":
        label += f"[{config.terminal_cost_kind.value}]"
    return label


def reported_forecast_mode(config: PolicyConfig) -> str:
    if config.kind in ("edf", "llf-ld"):
        return "none"
    if config.kind == "empc":
        return "perfect" if config.empc_reference == "realized-optimal" else "mean"
    return config.forecast_mode


def make_scenario(seed: int, setting: Setting, scenario_id: str = "") -> Scenario:
    return generate_scenario(seed, setting.arrival, setting.facility, setting.horizon,
                             setting.prices.energy_prices, scenario_id or f"seed{seed}")


class UpperBoundCache:
    """Hindsight optima keyed by (scenario id, demand-charge price)."""

    def __init__(self) -> None:
        self._store: dict[tuple[str, float], UpperBound] = {}

    def get(self, scenario: Scenario, setting: Setting) -> UpperBound:
        key = (scenario.scenario_id, setting.tariff.demand_charge_price)
        if key not in self._store:
            self._store[key] = solve_upper_bound(scenario, setting)
        return self._store[key]


def resolve_initial_peak(config: PolicyConfig, scenario: Scenario, setting: Setting,
                         cache: UpperBoundCache, history: Sequence[Scenario] = ()) -> float:
    """Initial tracked peak for a BMPC run.

    ``hindsight`` takes the optimal peak of the realized scenario;
    ``historical`` the mean optimal peak of held-out scenarios, rounded to
    the nearest attainable level (a multiple of R / l).
    """
    mode = config.initial_peak
    if config.kind != "bmpc" or mode == "zero":
        return 0.0
    if mode == "hindsight":
        return cache.get(scenario, setting).peak_kw
    if mode == "historical":
        if not history:
            raise InvalidInputError("historical initial peak needs held-out scenarios")
        peaks = [cache.get(s, setting).peak_kw for s in history]
        step = setting.facility.charging_rate / setting.horizon.window_size
        return step * math.floor(statistics.fmean(peaks) / step + 0.5)
    return float(mode)


def run_policy(config: PolicyConfig, scenario: Scenario, setting: Setting, cache: UpperBoundCache,
               history: Sequence[Scenario] = ()) -> tuple[SimulationTrace, RunReport]:
    """Simulate one policy on one scenario and attach its gap."""
    phi0 = resolve_initial_peak(config, scenario, setting, cache, history)
    run_setting = replace(setting, tariff=replace(setting.tariff, initial_peak=phi0,
                                                  terminal_cost_kind=config.terminal_cost_kind))
    reference = None
    if config.kind == "empc" and config.empc_reference == "realized-optimal":
        reference = reference_from_upper_bound(scenario, cache.get(scenario, setting), setting)
    policy = make_policy(config, reference)
    trace, report = run_simulation(policy, scenario, run_setting, policy_label(config),
                                   reported_forecast_mode(config))
    return trace, compute_gap(report, cache.get(scenario, setting))


@dataclass
class SummaryRow:
    dc_price: float
    policy: str
    forecast_mode: str
    scenarios: int
    mean_gap_pct: float
    std_gap_pct: float
    mean_total_reward: float
    mean_peak_kw: float


@dataclass
class SweepResult:
    runs: list[RunReport]
    summary: list[SummaryRow]
    failures: list[tuple[float, str, str, str]] = field(default_factory=list)
    upper_bounds: dict[tuple[str, float], UpperBound] = field(default_factory=dict)


def _scenario_cell(sweep: SweepConfig, s: int) -> tuple[list[RunReport], list, dict]:
    """All prices and policies for one scenario (the unit of parallel work)."""
    base = sweep.setting
    seed = sweep.seeds()[s]
    scenario = make_scenario(seed, base, f"s{s:03d}")
    history = [make_scenario(h, base, f"h{k:03d}") for k, h in enumerate(sweep.history_seeds())]
    cache = UpperBoundCache()
    invariant: dict[tuple, tuple[SimulationTrace, RunReport]] = {}
    runs, failures = [], []
    for price in sweep.dc_prices:
        setting = base.with_demand_charge(price)
        for config in sweep.policies:
            label = policy_label(config)
            try:
                key = (label, config.forecast_mode)
                if config.price_invariant and key in invariant:
                    trace, first = invariant[key]
                    report = compute_gap(first.repriced(price, trace.phi_final), cache.get(scenario, setting))
                else:
                    trace, report = run_policy(config, scenario, setting, cache, history)
                    if config.price_invariant:
                        invariant[key] = (trace, report)
                if not sweep.record_timing:
                    report = replace(report, runtime_ms=None)
                runs.append(report)
            except Exception as exc:  # recorded, sweep continues
                log.exception("cell failed: price=%s scenario=%s policy=%s", price, scenario.scenario_id, label)
                failures.append((price, scenario.scenario_id, label, f"{type(exc).__name__}: {exc}"))
    ubs = {k: v for k, v in cache._store.items() if k[0] == scenario.scenario_id}
    return runs, failures, ubs


def summarize(runs: Sequence[RunReport], upper_bounds: dict, sweep: SweepConfig) -> list[SummaryRow]:
    rows = []
    order = {policy_label(p): k for k, p in enumerate(sweep.policies)}
    for price in sweep.dc_prices:
        ub_here = [ub for (sid, p), ub in sorted(upper_bounds.items()) if p == price]
        if ub_here:
            rows.append(SummaryRow(price, "OPTIMAL", "hindsight", len(ub_here), 0.0, 0.0,
                                   statistics.fmean(u.objective for u in ub_here),
                                   statistics.fmean(u.peak_kw for u in ub_here)))
        groups: dict[tuple[str, str], list[RunReport]] = {}
        for r in runs:
            if r.dc_price == price:
                groups.setdefault((r.policy, r.forecast_mode), []).append(r)
        for (policy, mode), rs in sorted(groups.items(), key=lambda kv: (order.get(kv[0][0], 99), kv[0])):
            gaps = [r.gap_pct for r in rs]
            rows.append(SummaryRow(
                price, policy, mode, len(rs),
                statistics.fmean(gaps),
                statistics.stdev(gaps) if len(gaps) > 1 else 0.0,
                statistics.fmean(r.total_reward for r in rs),
                statistics.fmean(r.peak_kw for r in rs),
            ))
    return rows


def run_sweep(sweep: SweepConfig, progress: Optional[Callable[[int, int], None]] = None) -> SweepResult:
    """Simulate every (price, scenario, policy) cell and aggregate the gaps.

    Output order depends only on the configuration, never on worker timing.
    """
    cells = range(sweep.scenarios)
    results = []
    if sweep.workers > 1:
        with ProcessPoolExecutor(max_workers=sweep.workers) as pool:
            futures = [pool.submit(_scenario_cell, sweep, s) for s in cells]
            for k, f in enumerate(futures):
                results.append(f.result())
                if progress:
                    progress(k + 1, sweep.scenarios)
    else:
        for s in cells:
            results.append(_scenario_cell(sweep, s))
            if progress:
                progress(s + 1, sweep.scenarios)
    runs, failures, ubs = [], [], {}
    for r, f, u in results:
        runs.extend(r)
        failures.extend(f)
        ubs.update(u)
    price_rank = {p: k for k, p in enumerate(sweep.dc_prices)}
    policy_rank = {policy_label(p): k for k, p in enumerate(sweep.policies)}
    runs.sort(key=lambda r: (price_rank[r.dc_price], r.scenario_id, policy_rank.get(r.policy, 99), r.forecast_mode))
    return SweepResult(runs, summarize(runs, ubs, sweep), failures, ubs)
