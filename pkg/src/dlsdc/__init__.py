"""Scheduling EV charging under a peak-demand charge.

The package is organised as

* :mod:`dlsdc.core` - timescales, tariffs and the running peak tracker,
* :mod:`dlsdc.ev_model` - charger dynamics, rewards and feasibility,
* :mod:`dlsdc.scenario` - arrivals, prices and forecasts,
* :mod:`dlsdc.optimizer` - MILP formulations and a branch-and-bound solver,
* :mod:`dlsdc.policies` - BMPC, NMPC, EMPC, EDF and LLF-LD,
* :mod:`dlsdc.harness` - simulation, upper bounds, sweeps and reports.
"""

from .core import HorizonConfig, InvalidInputError, PeakTracker, TariffConfig, TerminalCostKind
from .ev_model import ChargerState, FacilityConfig, PriceConfig
from .policies import PolicyConfig, Setting, make_policy
from .scenario import ArrivalConfig, ArrivalEvent, Scenario, generate_scenario

__version__ = "0.1.0"

__all__ = [
    "ArrivalConfig", "ArrivalEvent", "ChargerState", "FacilityConfig", "HorizonConfig",
    "InvalidInputError", "PeakTracker", "PolicyConfig", "PriceConfig", "Scenario", "Setting",
    "TariffConfig", "TerminalCostKind", "generate_scenario", "make_policy",
]
