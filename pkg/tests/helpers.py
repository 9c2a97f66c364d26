"""Translate oracle instances into package objects."""

from __future__ import annotations

from typing import Optional

from dlsdc.core import HorizonConfig, TariffConfig, TerminalCostKind
from dlsdc.ev_model import FacilityConfig, PriceConfig
from dlsdc.optimizer.solver import SolveLimits
from dlsdc.policies import Setting
from dlsdc.scenario import ArrivalConfig, ArrivalEvent, Scenario, scenario_from_events

from oracles import Instance


def package_scenario(inst: Instance, scenario_id: str = "tiny") -> Scenario:
    events = [ArrivalEvent(*e) for e in inst.events]
    sc = scenario_from_events(events, inst.horizon, inst.energy_prices)
    return Scenario(inst.meta.get("seed"), sc.horizon, sc.events, 0, sc.prices, scenario_id)


def package_setting(inst: Instance, rolling: Optional[int] = None,
                    terminal: TerminalCostKind = TerminalCostKind.INCREMENTAL,
                    phi0: float = 0.0, limits: SolveLimits = SolveLimits()) -> Setting:
    horizon = HorizonConfig(inst.stage_minutes, inst.window, rolling or inst.horizon, inst.horizon)
    facility = FacilityConfig(inst.charger_count, inst.rate, inst.max_simultaneous)
    prices = PriceConfig(inst.reward_price, tuple(inst.energy_prices), inst.penalty_price)
    tariff = TariffConfig(inst.dc_price, terminal, phi0)
    arrival = ArrivalConfig(0.0, 120.0, 60.0)
    return Setting(horizon, facility, prices, tariff, arrival, limits)
