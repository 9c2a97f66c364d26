"""A small canonical form for mixed-integer linear programs (always maximized)."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import numpy as np
import scipy.sparse as sp


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    GAP_LIMIT = "GapLimit"
    TIME_LIMIT = "TimeLimit"


@dataclass
class Variable:
    name: str
    lb: float = 0.0
    ub: float = np.inf
    integer: bool = False
    priority: int = 0  # branched on before lower-priority fractional variables


@dataclass
class Constraint:
    name: str
    coeffs: dict[int, float]
    sense: str  # "<=", "==", ">="
    rhs: float


@dataclass
class MilpProblem:
    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    objective_constant: float = 0.0
    metadata: dict[str, Any] = field(default_factory=dict)
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    sense = "maximize"

    def add_variable(self, name: str, lb: float = 0.0, ub: float = np.inf,
                     integer: bool = False, obj: float = 0.0, priority: int = 0) -> int:
        if name in self._index:
            raise ValueError(f"duplicate variable {name}")
        if lb > ub:
            raise ValueError(f"variable {name}: lb {lb} > ub {ub}")
        idx = len(self.variables)
        self.variables.append(Variable(name, float(lb), float(ub), integer, priority))
        self._index[name] = idx
        if obj:
            self.objective[idx] = float(obj)
        return idx

    def add_binary(self, name: str, obj: float = 0.0) -> int:
        return self.add_variable(name, 0.0, 1.0, True, obj)

    def add_constraint(self, coeffs: Mapping[int, float], sense: str, rhs: float,
                       name: Optional[str] = None) -> int:
        if sense not in ("<=", "==", ">="):
            raise ValueError(f"bad relation {sense!r}")
        for j in coeffs:
            if not 0 <= j < len(self.variables):
                raise ValueError(f"constraint references undeclared variable {j}")
        idx = len(self.constraints)
        self.constraints.append(Constraint(name or f"c{idx}", dict(coeffs), sense, float(rhs)))
        return idx

    def index(self, name: str) -> int:
        return self._index[name]

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_integers(self) -> int:
        return sum(v.integer for v in self.variables)

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(len(self.variables))
        for j, v in self.objective.items():
            c[j] = v
        return c

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        return lb, ub

    def integer_mask(self) -> np.ndarray:
        return np.array([v.integer for v in self.variables], dtype=bool)

    def matrix(self, senses: tuple[str, ...]) -> tuple[sp.csr_matrix, np.ndarray]:
        """Rows with the given relations; ">=" rows are negated into "<=" form."""
        rows, cols, vals, rhs = [], [], [], []
        r = 0
        for con in self.constraints:
            if con.sense not in senses:
                continue
            sign = -1.0 if con.sense == ">=" else 1.0
            for j, a in con.coeffs.items():
                rows.append(r)
                cols.append(j)
                vals.append(sign * a)
            rhs.append(sign * con.rhs)
            r += 1
        A = sp.csr_matrix((vals, (rows, cols)), shape=(r, len(self.variables)))
        return A, np.array(rhs, dtype=float)

    def evaluate(self, x: np.ndarray) -> float:
        return float(self.objective_vector() @ np.asarray(x, dtype=float)) + self.objective_constant

    def max_violation(self, x: np.ndarray) -> float:
        """Largest violation of any bound, row or integrality requirement."""
        x = np.asarray(x, dtype=float)
        lb, ub = self.bounds()
        worst = float(max(np.max(lb - x, initial=0.0), np.max(x - ub, initial=0.0)))
        mask = self.integer_mask()
        if mask.any():
            worst = max(worst, float(np.max(np.abs(x[mask] - np.round(x[mask])))))
        for con in self.constraints:
            lhs = sum(a * x[j] for j, a in con.coeffs.items())
            if con.sense == "<=":
                worst = max(worst, lhs - con.rhs)
            elif con.sense == ">=":
                worst = max(worst, con.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - con.rhs))
        return worst


@dataclass
class MilpSolution:
    status: Status
    objective: Optional[float]
    values: Optional[np.ndarray]
    bound: Optional[float]
    names: tuple[str, ...] = ()
    nodes: int = 0
    lp_solves: int = 0
    root_bound: Optional[float] = None

    @property
    def gap(self) -> Optional[float]:
        """Relative distance between incumbent and proven bound."""
        if self.objective is None or self.bound is None:
            return None
        return (self.bound - self.objective) / max(1.0, abs(self.objective))

    @property
    def assignment(self) -> dict[str, float]:
        if self.values is None:
            return {}
        return dict(zip(self.names, (float(v) for v in self.values)))

    def value(self, name: str, default: float = 0.0) -> float:
        if self.values is None:
            return default
        try:
            return float(self.values[self.names.index(name)])
        except ValueError:
            return default
