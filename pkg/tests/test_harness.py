import hashlib
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from dlsdc.core import HorizonConfig, InvalidInputError, TariffConfig
from dlsdc.harness.config import parse_config
from dlsdc.harness.report import RUN_COLUMNS, emit_report
from dlsdc.harness.simulate import FeasibilityError, block_increments, run_simulation
from dlsdc.harness.sweep import (
    SweepConfig,
    UpperBound,
    compute_gap,
    make_scenario,
    run_sweep,
    solve_upper_bound,
)
from dlsdc.optimizer.milp import Status
from dlsdc.policies import BasePolicy, BMPCPolicy, EDFPolicy, PolicyConfig, ReplayPolicy
from dlsdc.scenario import scenario_from_events, ArrivalEvent

from helpers import package_scenario, package_setting
from oracles import Instance, random_instance

GOLDEN = Path(__file__).parent / "golden"

MINI = {
    "horizon": {"stage_length_minutes": 15, "window_size": 1, "rolling_window": 4, "horizon": 24},
    "facility": {"charger_count": 4, "charging_rate": 240.0, "max_simultaneous": 2},
    "prices": {"energy_price": 0.04},
    "arrival": {"arrival_rate": 0.8},
    "policies": [{"kind": "bmpc", "initial_peak": "hindsight"}, {"kind": "nmpc"}, {"kind": "edf"},
                 {"kind": "llf-ld"}, {"kind": "empc"}],
    "sweep": {"dc_prices": [0, 1, 3], "scenarios": 2, "base_seed": 11, "history": 2},
}


def mini_sweep(**overrides):
    return parse_config(MINI).sweep(**overrides)


class NeverCharge(BasePolicy):
    name = "IDLE"

    def act(self, t, states, tracker):
        return [0] * len(states)


class Reckless(BasePolicy):
    name = "RECKLESS"

    def act(self, t, states, tracker):
        return [1] * len(states)


def test_empty_scenario_any_policy():
    inst = Instance(3, 4, 2, 2, [], [0.05] * 4, 6.0)
    for phi0 in (0.0, 120.0):
        st = package_setting(inst, phi0=phi0)
        trace, report = run_simulation(EDFPolicy(), package_scenario(inst), st)
        assert report.service_reward == 0 and report.penalty == 0
        assert trace.phi_final == max(phi0, 0.0)


def test_single_ev_edf_trace():
    inst = Instance(2, 3, 1, 1, [(0, 0, 1, 2)], [0.05] * 3, 0.0)
    trace, report = run_simulation(EDFPolicy(), package_scenario(inst), package_setting(inst))
    assert trace.controls[:, 0].tolist() == [1, 0, 0]
    assert report.penalty == 0


def test_infeasible_policy_aborts_with_stage():
    inst = Instance(3, 2, 1, 1, [(0, 0, 1, 2), (0, 1, 1, 2)], [0.05] * 2, 0.0)
    with pytest.raises(FeasibilityError, match="stage 0"):
        run_simulation(Reckless(), package_scenario(inst), package_setting(inst))


@pytest.mark.parametrize("seed", range(5))
def test_replayed_upper_bound_has_zero_gap(seed):
    inst = random_instance(np.random.default_rng(400 + seed))
    sc, st = package_scenario(inst), package_setting(inst)
    ub = solve_upper_bound(sc, st)
    _, report = run_simulation(ReplayPolicy(ub.controls), sc, st)
    report = compute_gap(report, ub)
    assert report.total_reward == pytest.approx(ub.objective, abs=1e-6)
    assert abs(report.gap_pct) < 1e-6 or ub.objective == 0


def test_never_charging_overshoots_hundred_percent():
    inst = Instance(3, 4, 1, 2, [(0, 0, 2, 4), (1, 1, 3, 3)], [0.05] * 4, 0.0)
    sc, st = package_scenario(inst), package_setting(inst)
    ub = solve_upper_bound(sc, st)
    assert ub.objective > 0
    _, report = run_simulation(NeverCharge(), sc, st)
    report = compute_gap(report, ub)
    assert report.gap_pct > 100


def test_zero_bound_reports_absolute_gap():
    inst = Instance(3, 4, 1, 2, [], [0.05] * 4, 0.0)
    sc, st = package_scenario(inst), package_setting(inst)
    _, report = run_simulation(NeverCharge(), sc, st)
    report = compute_gap(report, solve_upper_bound(sc, st))
    assert report.gap_pct == 0 and "absolute-gap" in report.gap_flag


def test_time_limited_bound_is_flagged():
    inst = Instance(3, 4, 1, 2, [(0, 0, 2, 4)], [0.05] * 4, 0.0)
    sc, st = package_scenario(inst), package_setting(inst)
    _, report = run_simulation(NeverCharge(), sc, st)
    ub = UpperBound(10.0, 12.0, Status.TIME_LIMIT, np.zeros((4, 3)), 0.0)
    out = compute_gap(report, ub)
    assert out.ub_objective == 12.0 and out.gap_flag == "ub-TimeLimit"


@pytest.mark.parametrize("seed", range(4))
def test_accounting_identity_and_trace_peak(seed):
    inst = random_instance(np.random.default_rng(500 + seed), windows=(2,))
    sc, st = package_scenario(inst), package_setting(inst, rolling=2)
    for policy in (BMPCPolicy(), EDFPolicy()):
        trace, r = run_simulation(policy, sc, st)
        assert trace.stage_reward_sum() - inst.dc_price * trace.phi_final == pytest.approx(r.total_reward, abs=1e-9)
        assert r.peak_kw == trace.psi == trace.phi_final
        incs = block_increments(trace, inst.window)
        assert inst.dc_price * (trace.phi_final - trace.phi0) == pytest.approx(
            sum(inst.dc_price * d for d in incs), abs=1e-9)


def test_repricing_matches_fresh_run():
    sw = mini_sweep(scenarios=1)
    setting = sw.setting
    sc = make_scenario(11, setting)
    _, at0 = run_simulation(EDFPolicy(), sc, setting.with_demand_charge(0.0))
    trace, at9 = run_simulation(EDFPolicy(), sc, setting.with_demand_charge(9.0))
    assert at0.repriced(9.0, trace.phi_final).total_reward == pytest.approx(at9.total_reward, abs=1e-9)


def test_sweep_of_one_cell_matches_its_run():
    sw = replace(mini_sweep(), policies=(PolicyConfig("edf"),), dc_prices=(9.0,), scenarios=1)
    res = run_sweep(sw)
    assert len(res.runs) == 1
    rows = [r for r in res.summary if r.policy == "EDF"]
    assert len(rows) == 1 and rows[0].mean_gap_pct == res.runs[0].gap_pct and rows[0].std_gap_pct == 0


def test_sweep_config_validation():
    base = mini_sweep()
    with pytest.raises(InvalidInputError):
        replace(base, policies=())
    with pytest.raises(InvalidInputError):
        replace(base, scenarios=0)
    with pytest.raises(InvalidInputError):
        replace(base, dc_prices=(-1.0,))


def test_gaps_are_nonnegative_and_ub_peak_monotone():
    res = run_sweep(mini_sweep())
    assert not res.failures
    assert all(r.gap_pct >= -1e-4 for r in res.runs)
    for sid in {k[0] for k in res.upper_bounds}:
        peaks = [res.upper_bounds[(sid, p)].peak_kw for p in (0.0, 1.0, 3.0)]
        assert peaks == sorted(peaks, reverse=True)


def test_report_files_and_columns(tmp_path):
    res = run_sweep(mini_sweep())
    paths = emit_report(res, tmp_path / "out")
    assert [p.name for p in paths] == ["runs.csv", "summary.csv", "gap_vs_price.svg", "peak_vs_price.svg"]
    header = (tmp_path / "out" / "runs.csv").read_text().splitlines()[0]
    assert header.split(",") == list(RUN_COLUMNS)


def test_flagged_gaps_get_their_own_file(tmp_path):
    res = run_sweep(mini_sweep())
    res.runs[0] = replace(res.runs[0], gap_flag="absolute-gap")
    paths = emit_report(res, tmp_path)
    assert paths[-1].name == "gap_flags.csv"
    lines = paths[-1].read_text().splitlines()
    assert lines[0] == "scenario_id,policy,dc_price,flag"
    assert len(lines) == 2 and lines[1].endswith(",absolute-gap")


def test_empty_report_writes_nothing(tmp_path):
    from dlsdc.harness.sweep import SweepResult
    with pytest.raises(ValueError):
        emit_report(SweepResult([], []), tmp_path / "none")
    assert not (tmp_path / "none").exists()


def test_parallel_and_serial_sweeps_agree(tmp_path):
    a = run_sweep(mini_sweep())
    b = run_sweep(mini_sweep(workers=2))
    emit_report(a, tmp_path / "a")
    emit_report(b, tmp_path / "b")
    for name in ("runs.csv", "summary.csv", "gap_vs_price.svg", "peak_vs_price.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_golden_mini_sweep(tmp_path):
    emit_report(run_sweep(mini_sweep()), tmp_path)
    for name in ("runs.csv", "summary.csv"):
        assert (tmp_path / name).read_text() == (GOLDEN / f"mini_{name}").read_text()


def test_config_errors():
    with pytest.raises(InvalidInputError, match="unknown"):
        parse_config({"facility": {"chargers": 3}})
    with pytest.raises(InvalidInputError):
        parse_config({"horizon": {"horizon": 100}})
    with pytest.raises(InvalidInputError):
        parse_config({"policy": {"kind": "random"}})
