"""Closed-loop simulation, gap computation, sweeps and reports."""

from .simulate import FeasibilityError, RunReport, SimulationTrace, block_increments, run_simulation
from .sweep import SweepConfig, SweepResult, compute_gap, run_sweep, solve_upper_bound

__all__ = [
    "FeasibilityError", "RunReport", "SimulationTrace", "SweepConfig", "SweepResult",
    "block_increments", "compute_gap", "run_simulation", "run_sweep", "solve_upper_bound",
]
