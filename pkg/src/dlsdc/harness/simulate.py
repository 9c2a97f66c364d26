"""Closed-loop simulation of one policy on one realized scenario."""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ..core import PeakTracker, realized_peak, update_peak_tracker
from ..ev_model import IDLE, ChargerState, StageReward, check_feasible, stage_reward, step_charger, total_consumption
from ..policies import BasePolicy, BMPCPolicy, PolicyConfig, Setting
from ..scenario import Scenario


class FeasibilityError(RuntimeError):
    """A policy emitted an infeasible control; this is a bug in the policy."""


@dataclass(frozen=True)
class StageRecord:
    t: int
    state_digest: str
    controls: tuple[int, ...]
    reward: StageReward
    consumption: float
    phi: float  # tracked peak after this stage


@dataclass
class SimulationTrace:
    records: list[StageRecord]
    phi0: float
    psi: float  # realized peak of the consumption trace
    phi_final: float
    rejected: int
    deactivations: int
    block_starts: list[int] = field(default_factory=list)

    @property
    def consumption(self) -> list[float]:
        return [r.consumption for r in self.records]

    @property
    def phi_trace(self) -> list[float]:
        """Tracked peak at stages 0..T."""
        return [self.phi0] + [r.phi for r in self.records]

    @property
    def controls(self) -> np.ndarray:
        return np.array([r.controls for r in self.records], dtype=np.int64)

    def totals(self) -> tuple[float, float, float]:
        service = energy = penalty = 0.0
        for r in self.records:
            service += r.reward.service
            energy += r.reward.energy
            penalty += r.reward.penalty
        return service, energy, penalty

    def stage_reward_sum(self) -> float:
        total = 0.0
        for r in self.records:
            total += r.reward.total
        return total


@dataclass
class RunReport:
    scenario_id: str
    seed: Optional[int]
    policy: str
    dc_price: float
    forecast_mode: str
    total_reward: float
    service_reward: float
    energy_cost: float
    penalty: float
    demand_charge: float
    peak_kw: float
    ub_objective: Optional[float] = None
    gap_pct: Optional[float] = None
    deactivations: int = 0
    runtime_ms: Optional[float] = None
    gap_flag: str = ""
    stage_reward_sum: float = 0.0

    def repriced(self, dc_price: float, billed_peak: float) -> "RunReport":
        charge = dc_price * billed_peak
        return replace(self, dc_price=dc_price, demand_charge=charge,
                       total_reward=self.stage_reward_sum - charge,
                       ub_objective=None, gap_pct=None, gap_flag="")


def _digest(states: Sequence[ChargerState]) -> str:
    raw = ",".join(f"{x.remaining}:{x.lead_time}" for x in states).encode()
    return hashlib.blake2b(raw, digest_size=8).hexdigest()


def run_simulation(
    policy: BasePolicy,
    scenario: Scenario,
    setting: Setting,
    policy_name: Optional[str] = None,
    forecast_mode: str = "",
) -> tuple[SimulationTrace, RunReport]:
    """Step the policy through the realized scenario and account for it.

    Each stage: place arrivals, ask the policy, check feasibility, collect
    the stage reward, advance the chargers and fold consumption into the
    peak tracker. The demand charge is billed on the tracked peak at ``T``.
    """
    started = time.perf_counter()
    h, fac = setting.horizon, setting.facility
    N = fac.charger_count
    if scenario.horizon != h.horizon:
        raise ValueError(f"scenario horizon {scenario.horizon} != configured {h.horizon}")
    arrivals = scenario.arrivals_by_stage()
    states = [IDLE] * N
    for i, ev in arrivals.get(0, {}).items():
        states[i] = ChargerState(ev.demand_stages, ev.deadline_stages)
    tracker = PeakTracker(phi=setting.tariff.initial_peak)
    policy.start(scenario, setting)
    records = []
    for t in range(h.horizon):
        u = [int(v) for v in policy.act(t, states, tracker)]
        problems = check_feasible(u, states, fac)
        if problems:
            raise FeasibilityError(
                f"{policy.name} at stage {t}: " + "; ".join(v.detail for v in problems)
            )
        reward = stage_reward(states, u, t, setting.prices, fac, h.stage_length_minutes)
        c = total_consumption(u, fac)
        tracker = update_peak_tracker(tracker, c, t + 1, h)
        records.append(StageRecord(t, _digest(states), tuple(u), reward, c, tracker.phi))
        nxt = arrivals.get(t + 1, {})
        states = [step_charger(states[i], u[i], nxt.get(i)) for i in range(N)]

    consumption = [r.consumption for r in records]
    trace = SimulationTrace(
        records=records,
        phi0=setting.tariff.initial_peak,
        psi=realized_peak(consumption, h),
        phi_final=tracker.phi,
        rejected=scenario.rejected,
        deactivations=policy.deactivations,
        block_starts=[b.start for b in policy.blocks] if isinstance(policy, BMPCPolicy) else [],
    )
    service, energy, penalty = trace.totals()
    stage_sum = trace.stage_reward_sum()
    charge = setting.tariff.demand_charge_price * tracker.phi
    report = RunReport(
        scenario_id=scenario.scenario_id,
        seed=scenario.seed,
        policy=policy_name or policy.name,
        dc_price=setting.tariff.demand_charge_price,
        forecast_mode=forecast_mode,
        total_reward=stage_sum - charge,
        service_reward=service,
        energy_cost=energy,
        penalty=penalty,
        demand_charge=charge,
        peak_kw=trace.psi,
        deactivations=trace.deactivations,
        runtime_ms=(time.perf_counter() - started) * 1000.0,
        stage_reward_sum=stage_sum,
    )
    return trace, report


def block_increments(trace: SimulationTrace, ell: int) -> list[float]:
    """Rise of the tracked peak over each block of ``ell`` stages."""
    phis = trace.phi_trace
    return [phis[min(b + ell, len(phis) - 1)] - phis[b] for b in range(0, len(phis) - 1, ell)]
