import math
import os
from pathlib import Path

import pytest

import evmpc

SCENARIOS = Path(os.environ.get("EVMPC_SOURCE_DIR", Path(__file__).resolve().parents[2])) / "scenarios"


def load(name, overrides=()):
    return evmpc.parse_scenario((SCENARIOS / name).read_text(), list(overrides))


def test_utility_and_cost():
    assert evmpc.utility(22.0, 10.0) == pytest.approx(10 * math.log(23))
    assert evmpc.generation_cost(10.0, evmpc.DSOSpec()) == pytest.approx(15.0)
    with pytest.raises(ValueError):
        evmpc.utility(-1.0, 10.0)


def test_price_update():
    assert evmpc.update_price([16.0], [-50.0], 0.01) == pytest.approx([16.5])
    assert evmpc.update_price([0.1], [100.0], 0.01) == [0.0]


def test_ev_plan_meets_energy():
    ev = evmpc.EVSession("car", 0, 2, energy=3.0)
    sol = evmpc.solve_ev(ev, 0, 0.25, [4.0, 8.0])
    assert sol.feasible
    assert sol.profile[0] > sol.profile[1]
    assert sum(sol.profile) * 0.25 == pytest.approx(3.0, abs=1e-6)


def test_dso_zero_price():
    st = evmpc.StorageSpec(-100, 100, 100, 100)
    sol = evmpc.solve_dso(evmpc.DSOSpec(), st, 100.0, 0.25, [0.0])
    assert sol.p_l[0] == pytest.approx(0.0, abs=1e-9)
    assert sol.p_s[0] == pytest.approx(0.9 / 0.245)


def test_reference_run():
    sc = load("table1.scenario")
    trace = evmpc.run(sc)
    assert len(trace.slots) == 48
    assert trace.summary.nonconverged_slots == 0
    assert all(e.final_energy <= 1e-3 for e in trace.evs)
    base = evmpc.simulate_uncontrolled(sc)
    assert trace.summary.peak_demand <= base.summary.peak_demand
    assert trace.slot_table() == evmpc.run(sc).slot_table()


def test_verify_small():
    report = evmpc.verify(load("small.scenario"))
    assert report.relative_gap <= 0.01


def test_invalid_scenario():
    with pytest.raises(evmpc.ScenarioError):
        load("broken.scenario")
    with pytest.raises(evmpc.ScenarioError):
        evmpc.parse_scenario("")


def test_round_trip_and_overrides(tmp_path):
    sc = load("small.scenario", ["solver.gamma=0.01"])
    assert sc.solver.gamma == 0.01
    assert evmpc.parse_scenario(evmpc.write_scenario(sc)) == sc
    trace = evmpc.run(sc)
    trace.write(tmp_path)
    assert (tmp_path / "slots.csv").read_text().startswith("slot,time_hours,")
