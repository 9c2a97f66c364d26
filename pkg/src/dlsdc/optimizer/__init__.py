"""MILP model container, branch-and-bound solver, LP files and the scheduling formulations."""

from .milp import Constraint, MilpProblem, MilpSolution, Status, Variable
from .solver import ProblemTooLargeError, SolveLimits, SolverError, solve

__all__ = [
    "Constraint", "MilpProblem", "MilpSolution", "ProblemTooLargeError", "SolveLimits",
    "SolverError", "Status", "Variable", "solve",
]
