import pytest
from hypothesis import given, strategies as st

from dlsdc.core import (
    HorizonConfig,
    InvalidInputError,
    PeakTracker,
    TariffConfig,
    TerminalCostKind,
    demand_charge,
    realized_peak,
    revised_stage_reward,
    terminal_cost,
    update_peak_tracker,
    window_averages,
)

from oracles import window_peak


def horizon(ell=3, w=3, T=3, minutes=5):
    return HorizonConfig(minutes, ell, w, T)


def feed(trace, h, phi0=0.0):
    tr = PeakTracker(phi=phi0)
    out = [tr]
    for t, c in enumerate(trace):
        tr = update_peak_tracker(tr, c, t + 1, h)
        out.append(tr)
    return out


def test_window_below_peak_keeps_peak():
    assert feed([3000, 3500, 4000], horizon(), 4000)[-1].phi == 4000


def test_window_above_peak_raises_it():
    assert feed([5000, 6000, 7000], horizon(), 4000)[-1].phi == 6000


def test_mid_window_stage_leaves_peak():
    h = horizon(T=6, w=6)
    tr = update_peak_tracker(PeakTracker(phi=100), 10_000, 1, h)
    assert tr.phi == 100 and tr.window_accumulator == 10_000 and tr.stages_in_window == 1


def test_final_window_is_counted():
    h = horizon(ell=2, w=2, T=4)
    assert feed([0, 0, 6, 6], h)[-1].phi == 6


@pytest.mark.parametrize("bad", [0, 4])
def test_next_stage_out_of_range(bad):
    with pytest.raises(InvalidInputError):
        update_peak_tracker(PeakTracker(), 1.0, bad, horizon())


def test_negative_consumption_rejected():
    with pytest.raises(InvalidInputError):
        update_peak_tracker(PeakTracker(), -1.0, 1, horizon())


@pytest.mark.parametrize("psi, price, expected", [(0, 13, 0), (4960, 6, 29_760), (1, 21, 21)])
def test_demand_charge(psi, price, expected):
    assert demand_charge(psi, TariffConfig(price)) == expected


def test_realized_peak_examples():
    assert realized_peak([2, 5, 3], HorizonConfig(5, 1, 1, 3)) == 5
    assert realized_peak([2, 4, 10, 0], HorizonConfig(5, 2, 2, 4)) == 5
    assert realized_peak([0] * 6, HorizonConfig(5, 3, 3, 6)) == 0


def test_realized_peak_rejects_bad_traces():
    h = HorizonConfig(5, 2, 2, 4)
    with pytest.raises(InvalidInputError):
        realized_peak([1, 2, 3], h)
    with pytest.raises(InvalidInputError):
        realized_peak([1, -2, 3, 0], h)
    with pytest.raises(InvalidInputError):
        window_averages([1, 2, 3], 2)


def test_terminal_costs():
    tariff = TariffConfig(10)
    h = HorizonConfig(5, 3, 96, 288)
    assert terminal_cost(TerminalCostKind.INCREMENTAL, 5000, 5000, h, tariff) == 0
    assert terminal_cost("incremental", 6000, 5000, h, tariff) == 10_000
    assert terminal_cost("averaged", 3000, 0, h, TariffConfig(6)) == pytest.approx(6000)
    assert terminal_cost("full", 3000, 0, h, TariffConfig(6)) == 18_000
    assert terminal_cost("none", 3000, 0, h, TariffConfig(6)) == 0
    with pytest.raises(InvalidInputError):
        terminal_cost("incremental", 1, 2, h, tariff)
    with pytest.raises(InvalidInputError):
        TerminalCostKind.parse("quadratic")


def test_revised_stage_reward():
    t = TariffConfig(6)
    assert revised_stage_reward(12, 5000, 5000, t) == 12
    assert revised_stage_reward(12, 5100, 5000, t) == -588
    with pytest.raises(InvalidInputError):
        revised_stage_reward(12, 4000, 5000, t)


@pytest.mark.parametrize("args", [(5, 3, 4, 12), (5, 3, 6, 10), (5, 0, 1, 1), (5, 3, 2, 6), (0, 1, 1, 1), (5, 2, 4, 2)])
def test_horizon_validation(args):
    with pytest.raises(InvalidInputError):
        HorizonConfig(*args)


def test_horizon_windows():
    h = HorizonConfig(5, 3, 12, 24)
    assert list(h.window_starts)[:3] == [0, 3, 6]
    assert list(h.window_ends)[-1] == 24
    assert h.is_window_start(21) and not h.is_window_start(24)
    assert h.window_end(18) == 24


def test_tariff_validation():
    with pytest.raises(InvalidInputError):
        TariffConfig(-1)
    with pytest.raises(InvalidInputError):
        TariffConfig(1, initial_peak=-5)


traces = st.integers(1, 4).flatmap(
    lambda ell: st.tuples(st.just(ell), st.integers(1, 6).flatmap(
        lambda k: st.lists(st.integers(0, 5).map(lambda n: 240.0 * n), min_size=ell * k, max_size=ell * k))))


@given(traces, st.sampled_from([0.0, 80.0, 500.0]))
def test_tracker_matches_window_maximum(case, phi0):
    ell, trace = case
    h = HorizonConfig(5, ell, ell, len(trace))
    hist = feed(trace, h, phi0)
    assert hist[-1].phi == pytest.approx(max(phi0, window_peak(trace, ell)), abs=1e-9)
    if phi0 == 0:
        assert hist[-1].phi == pytest.approx(realized_peak(trace, h), abs=1e-9)
    assert all(a.phi <= b.phi for a, b in zip(hist, hist[1:]))


@given(traces, st.floats(0, 25))
def test_revised_rewards_telescope(case, price):
    ell, trace = case
    h = HorizonConfig(5, ell, ell, len(trace))
    tariff = TariffConfig(price)
    hist = feed(trace, h)
    rewards = [float(k) for k in range(len(trace))]
    revised = sum(revised_stage_reward(g, hist[t + 1].phi, hist[t].phi, tariff) for t, g in enumerate(rewards))
    assert revised == pytest.approx(sum(rewards) - price * (hist[-1].phi - hist[0].phi), abs=1e-6)
