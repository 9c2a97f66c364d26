"""Best-bound branch and bound over LP relaxations.

Relaxations are solved with HiGHS through ``scipy.optimize.linprog``; the
tree search, branching rule and pruning are done here so results are
reproducible bit for bit. Nodes are expanded in order of LP bound (ties by
creation order) and branch on the most fractional integer variable (ties
by lowest index).
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .milp import MilpProblem, MilpSolution, Status

log = logging.getLogger(__name__)

INT_TOL = 1e-6
FEAS_TOL = 1e-6


class ProblemTooLargeError(RuntimeError):
    """The built-in solver refuses instances above its binary-count threshold."""


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolveLimits:
    gap: float = 1e-6
    time_limit: Optional[float] = None  # seconds
    node_limit: Optional[int] = None
    max_integers: int = 5000


class _Relaxation:
    def __init__(self, problem: MilpProblem):
        self.c = -problem.objective_vector()
        self.constant = problem.objective_constant
        A_ub, b_ub = problem.matrix(("<=", ">="))
        A_eq, b_eq = problem.matrix(("==",))
        self.A_ub = A_ub if A_ub.shape[0] else None
        self.b_ub = b_ub if A_ub.shape[0] else None
        self.A_eq = A_eq if A_eq.shape[0] else None
        self.b_eq = b_eq if A_eq.shape[0] else None
        self.solves = 0

    def solve(self, lb: np.ndarray, ub: np.ndarray) -> Optional[tuple[float, np.ndarray]]:
        self.solves += 1
        if np.any(lb > ub):
            return None
        res = linprog(
            self.c, A_ub=self.A_ub, b_ub=self.b_ub, A_eq=self.A_eq, b_eq=self.b_eq,
            bounds=np.column_stack([lb, ub]), method="highs",
        )
        if res.status == 2:
            return None
        if res.status != 0:
            raise SolverError(f"LP relaxation failed: {res.message}")
        return -res.fun + self.constant, res.x


def _tolerance(incumbent: float, gap: float) -> float:
    return max(1e-9, gap * abs(incumbent))


def _most_fractional(x: np.ndarray, int_idx: np.ndarray, priority: Optional[np.ndarray] = None) -> Optional[int]:
    """Branching variable: highest priority first, then most fractional,
    then lowest index. None if ``x`` is integral."""
    if int_idx.size == 0:
        return None
    vals = x[int_idx]
    frac = vals - np.floor(vals)
    score = np.minimum(frac, 1.0 - frac)
    fractional = score > INT_TOL
    if not fractional.any():
        return None
    if priority is not None:
        top = priority[fractional].max()
        score = np.where(fractional & (priority == top), score, -1.0)
    return int(int_idx[int(np.argmax(score))])


def _snap(x: np.ndarray, int_idx: np.ndarray) -> np.ndarray:
    x = x.copy()
    x[int_idx] = np.round(x[int_idx])
    return x


def solve(problem: MilpProblem, limits: Optional[SolveLimits] = None, **kwargs) -> MilpSolution:
    """Solve ``problem`` to proven optimality within ``limits.gap`` (relative).

    Keyword arguments override fields of ``limits``.
    """
    limits = limits or SolveLimits()
    if kwargs:
        limits = SolveLimits(**{**limits.__dict__, **kwargs})
    names = tuple(v.name for v in problem.variables)
    n_int = problem.num_integers
    if n_int > limits.max_integers:
        raise ProblemTooLargeError(
            f"{n_int} integer variables exceed the built-in limit of {limits.max_integers}; "
            "export the problem to an LP file and use an external solver"
        )
    if not problem.variables:
        return MilpSolution(Status.OPTIMAL, problem.objective_constant, np.zeros(0),
                            problem.objective_constant, names, 0, 0, problem.objective_constant)

    started = time.perf_counter()
    relax = _Relaxation(problem)
    lb0, ub0 = problem.bounds()
    int_idx = np.flatnonzero(problem.integer_mask())
    priority = np.array([problem.variables[j].priority for j in int_idx], dtype=np.int64)
    for j in int_idx:
        if np.isfinite(lb0[j]):
            lb0[j] = math.ceil(lb0[j] - INT_TOL)
        if np.isfinite(ub0[j]):
            ub0[j] = math.floor(ub0[j] + INT_TOL)

    root = relax.solve(lb0, ub0)
    if root is None:
        return MilpSolution(Status.INFEASIBLE, None, None, None, names, 1, relax.solves)
    root_bound, root_x = root

    incumbent: Optional[float] = None
    best_x: Optional[np.ndarray] = None

    def offer(x: np.ndarray) -> None:
        nonlocal incumbent, best_x
        xs = _snap(x, int_idx)
        val = problem.evaluate(xs)
        if incumbent is None or val > incumbent + 1e-12:
            incumbent, best_x = val, xs

    heap: list[tuple[float, int, np.ndarray, np.ndarray, np.ndarray]] = []
    seq = 0
    nodes = 1
    branch = _most_fractional(root_x, int_idx, priority)
    if branch is None:
        offer(root_x)
    else:
        heapq.heappush(heap, (-root_bound, seq, lb0, ub0, root_x))

    status = Status.OPTIMAL
    while heap:
        neg_bound, _, lb, ub, x = heap[0]
        bound = -neg_bound
        if incumbent is not None and bound <= incumbent + _tolerance(incumbent, limits.gap):
            break
        if limits.time_limit is not None and time.perf_counter() - started > limits.time_limit:
            status = Status.TIME_LIMIT
            break
        if limits.node_limit is not None and nodes >= limits.node_limit:
            status = Status.GAP_LIMIT
            break
        heapq.heappop(heap)
        j = _most_fractional(x, int_idx, priority)
        down_ub = ub.copy()
        down_ub[j] = math.floor(x[j])
        up_lb = lb.copy()
        up_lb[j] = math.ceil(x[j])
        for child_lb, child_ub in ((lb, down_ub), (up_lb, ub)):
            nodes += 1
            res = relax.solve(child_lb, child_ub)
            if res is None:
                continue
            val, cx = res
            if incumbent is not None and val <= incumbent + _tolerance(incumbent, limits.gap):
                continue
            if _most_fractional(cx, int_idx) is None:
                offer(cx)
            else:
                seq += 1
                heapq.heappush(heap, (-val, seq, child_lb, child_ub, cx))

    open_bound = -heap[0][0] if heap else -np.inf
    if incumbent is None:
        if status is Status.OPTIMAL:
            return MilpSolution(Status.INFEASIBLE, None, None, None, names, nodes, relax.solves, root_bound)
        return MilpSolution(status, None, None, open_bound, names, nodes, relax.solves, root_bound)

    bound = max(incumbent, open_bound) if status is not Status.OPTIMAL else max(
        incumbent, min(open_bound, incumbent + _tolerance(incumbent, limits.gap)))
    scale = max(1.0, abs(incumbent))
    if root_bound < incumbent - 1e-7 * scale:
        raise SolverError(f"relaxation bound {root_bound} below integer optimum {incumbent}")
    violation = problem.max_violation(best_x)
    if violation > FEAS_TOL:
        raise SolverError(f"incumbent violates constraints by {violation}")
    log.debug("solved %s: obj=%.6f nodes=%d lps=%d", problem.metadata.get("kind"), incumbent, nodes, relax.solves)
    return MilpSolution(status, incumbent, best_x, bound, names, nodes, relax.solves, root_bound)
