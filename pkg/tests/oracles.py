"""Independent reference implementations used as test oracles.

Nothing here imports the package's model code: dynamics, rewards and the
peak rule are re-derived from scratch so that agreement means something.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np


@dataclass
class Instance:
    """A tiny scheduling problem in plain numbers."""

    charger_count: int
    horizon: int
    window: int  # l, stages per measurement window
    max_simultaneous: int
    events: list[tuple[int, int, int, int]]  # (stage, charger, demand stages, deadline stages)
    energy_prices: list[float]
    dc_price: float
    rate: float = 240.0
    stage_minutes: float = 5.0
    reward_price: float = 0.35
    penalty_price: float = 0.3
    meta: dict = field(default_factory=dict)

    @property
    def stage_energy(self) -> float:
        return self.rate * self.stage_minutes / 60.0


def random_instance(rng: np.random.Generator, max_chargers: int = 3, max_horizon: int = 8,
                    windows: Sequence[int] = (1, 2), max_simultaneous: int = 2,
                    occupancy: float = 0.6, max_demand: int = 3, max_deadline: int = 4) -> Instance:
    ell = int(rng.choice(windows))
    T = ell * int(rng.integers(1, max_horizon // ell + 1))
    N = int(rng.integers(2, max_chargers + 1))
    M = int(rng.integers(1, min(max_simultaneous, N - 1) + 1))
    events = []
    for i in range(N):
        t = 0
        while t < T:
            if rng.random() < occupancy:
                demand = int(rng.integers(1, max_demand + 1))
                deadline = int(rng.integers(1, max_deadline + 1))
                events.append((t, i, demand, deadline))
                t += deadline
            else:
                t += 1
    events.sort()
    prices = [round(float(rng.uniform(0.0, 0.3)), 4) for _ in range(T)]
    dc = round(float(rng.uniform(0.0, 25.0)), 2)
    minutes = float(rng.choice([5.0, 15.0]))
    return Instance(N, T, ell, M, events, prices, dc, stage_minutes=minutes)


def _arrivals(inst: Instance) -> dict[int, dict[int, tuple[int, int]]]:
    out: dict[int, dict[int, tuple[int, int]]] = {}
    for t0, i, d, tau in inst.events:
        out.setdefault(t0, {})[i] = (d, tau)
    return out


def _step(inst: Instance, arrivals, t: int, states: tuple, u: tuple) -> tuple:
    nxt = arrivals.get(t + 1, {})
    out = []
    for i, ((r, tau), ui) in enumerate(zip(states, u)):
        if tau > 1:
            out.append((r - ui, tau - 1))
        else:
            out.append(nxt.get(i, (0, 0)))
    return tuple(out)


def _reward(inst: Instance, t: int, states: tuple, u: tuple) -> float:
    served = sum(u)
    unmet = sum(r - ui for (r, tau), ui in zip(states, u) if tau == 1)
    e = inst.stage_energy
    return e * ((inst.reward_price - inst.energy_prices[t]) * served - inst.penalty_price * unmet)


def _choices(inst: Instance, states: tuple):
    live = [i for i, (r, tau) in enumerate(states) if r >= 1 and tau >= 1]
    for k in range(min(len(live), inst.max_simultaneous) + 1):
        for on in itertools.combinations(live, k):
            yield tuple(1 if i in on else 0 for i in range(inst.charger_count))


def _initial(inst: Instance, arrivals) -> tuple:
    first = arrivals.get(0, {})
    return tuple(first.get(i, (0, 0)) for i in range(inst.charger_count))


def evaluate(inst: Instance, controls: Sequence[Sequence[int]], phi0: float = 0.0) -> Optional[float]:
    """Total reward of a control matrix, or None if it is infeasible."""
    arrivals = _arrivals(inst)
    x = _initial(inst, arrivals)
    total, acc, phi = 0.0, 0.0, phi0
    for t in range(inst.horizon):
        u = tuple(int(v) for v in controls[t])
        if sum(u) > inst.max_simultaneous:
            return None
        if any(ui and (r < 1 or tau < 1) for (r, tau), ui in zip(x, u)):
            return None
        total += _reward(inst, t, x, u)
        acc += inst.rate * sum(u)
        if (t + 1) % inst.window == 0:
            phi = max(phi, acc / inst.window)
            acc = 0.0
        x = _step(inst, arrivals, t, x, u)
    return total - inst.dc_price * phi


def brute_force_matrices(inst: Instance) -> float:
    """Best total reward over literally every 0/1 control matrix."""
    T, N = inst.horizon, inst.charger_count
    best = -math.inf
    for bits in itertools.product((0, 1), repeat=T * N):
        m = [bits[t * N:(t + 1) * N] for t in range(T)]
        v = evaluate(inst, m)
        if v is not None and v > best:
            best = v
    return best


def brute_force_tree(inst: Instance, phi0: float = 0.0) -> tuple[float, list[tuple[int, ...]]]:
    """Best total reward over every feasible control sequence.

    Walks the full decision tree, caching subtrees by the complete simulator
    state (stage, charger states, open-window energy, tracked peak); two
    histories that reach the same state have identical futures, so this is
    the same as enumerating every feasible control matrix.
    """
    arrivals = _arrivals(inst)

    @lru_cache(maxsize=None)
    def best(t: int, x: tuple, acc: float, phi: float) -> tuple[float, tuple]:
        if t == inst.horizon:
            return -inst.dc_price * phi, ()
        top, plan = -math.inf, ()
        for u in _choices(inst, x):
            a = acc + inst.rate * sum(u)
            p = phi
            if (t + 1) % inst.window == 0:
                p = max(phi, a / inst.window)
                a = 0.0
            future, rest = best(t + 1, _step(inst, arrivals, t, x, u), a, p)
            v = _reward(inst, t, x, u) + future
            if v > top + 1e-12:
                top, plan = v, (u,) + rest
        return top, plan

    value, plan = best(0, _initial(inst, arrivals), 0.0, phi0)
    return value, list(plan)


def window_peak(trace: Sequence[float], ell: int) -> float:
    """Highest average over consecutive non-overlapping windows of ``ell`` values."""
    peaks = [sum(trace[k:k + ell]) / ell for k in range(0, len(trace) - ell + 1, ell)]
    return max(peaks, default=0.0)


def edf_oracle(states: Sequence[tuple[int, int]], m: int) -> set[int]:
    live = [(tau, i) for i, (r, tau) in enumerate(states) if r >= 1 and tau >= 1]
    return {i for _, i in sorted(live)[:m]}


def llf_ld_oracle(states: Sequence[tuple[int, int]], m: int) -> set[int]:
    live = [(tau - r, -tau, i) for i, (r, tau) in enumerate(states) if r >= 1 and tau >= 1]
    return {i for *_, i in sorted(live)[:m]}
