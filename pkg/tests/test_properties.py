"""Randomized invariants across modules."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dlsdc.ev_model import ChargerState, FacilityConfig
from dlsdc.harness.simulate import run_simulation
from dlsdc.harness.sweep import compute_gap, solve_upper_bound
from dlsdc.policies import BMPCPolicy, EDFPolicy, LLFLDPolicy, NMPCPolicy, edf_step, llf_ld_step, repair_controls

from helpers import package_scenario, package_setting
from oracles import brute_force_tree, edf_oracle, evaluate, llf_ld_oracle, random_instance

seeds = st.integers(0, 2**32 - 1)
states = st.lists(st.tuples(st.integers(0, 5), st.integers(0, 6)), min_size=2, max_size=10)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_upper_bound_equals_tree_enumeration(seed):
    inst = random_instance(np.random.default_rng(seed))
    ub = solve_upper_bound(package_scenario(inst), package_setting(inst))
    assert ub.objective == pytest.approx(brute_force_tree(inst)[0], abs=1e-6)
    # the decoded schedule is feasible and worth exactly the optimum
    assert evaluate(inst, ub.controls) == pytest.approx(ub.objective, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_no_policy_beats_the_upper_bound(seed):
    inst = random_instance(np.random.default_rng(seed), windows=(1, 2))
    sc = package_scenario(inst)
    rolling = inst.window * max(1, inst.horizon // inst.window // 2)
    st_ = package_setting(inst, rolling=rolling)
    ub = solve_upper_bound(sc, st_)
    for policy in (BMPCPolicy(), NMPCPolicy(), EDFPolicy(), LLFLDPolicy()):
        _, report = run_simulation(policy, sc, st_)
        assert compute_gap(report, ub).gap_pct >= -1e-4


@given(states, st.data())
def test_index_rules_respect_capacity_and_oracles(raw, data):
    raw = [(r, tau) if tau else (0, 0) for r, tau in raw]
    m = data.draw(st.integers(1, len(raw) - 1))
    xs = [ChargerState(*x) for x in raw]
    fac = FacilityConfig(len(raw), 240.0, m)
    for rule, oracle in ((edf_step, edf_oracle), (llf_ld_step, llf_ld_oracle)):
        u = rule(xs, fac)
        assert sum(u) <= m
        assert {i for i, v in enumerate(u) if v} == oracle(raw, m)


@given(states, st.data())
def test_repair_only_switches_off(raw, data):
    xs = [ChargerState(*x) for x in raw]
    plan = data.draw(st.lists(st.integers(0, 1), min_size=len(xs), max_size=len(xs)))
    fixed, dropped = repair_controls(plan, xs)
    assert all(f <= p for f, p in zip(fixed, plan))
    assert dropped == sum(plan) - sum(fixed)
    assert all(not f or x.serviceable for f, x in zip(fixed, xs))
