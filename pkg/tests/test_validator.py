import copy
import json

import pytest

from blackstart import cases
from blackstart.der import GfmiParams, qss_frequency
from blackstart.feeder import parse_feeder
from blackstart.planner import GfmiState, PlanningConfig, RestorationPlan, StepRecord, metrics, solve_plan
from blackstart.validator import (
    accuracy_pct,
    check_frequency_security,
    closure_state,
    validate_plan,
    verify_frequency_estimates,
)
from checks import mutation_caught, mutations, radiality_violations, sync_violations
from conftest import FREQ

# published verification table, 1/2/10 MW: (measured, estimated, accuracy %)
TABLE = {
    "rocof": [(-0.3529, -0.3780, 92.89), (-0.7058, -0.7500, 93.74), (-3.6106, -3.7500, 96.14)],
    "nadir": [(59.9629, 59.9635, 98.38), (59.9251, 59.9272, 97.20), (59.6161, 59.6357, 94.89)],
    "qss": [(59.9662, 59.9666, 98.82), (59.9316, 59.9333, 97.51), (59.6490, 59.6666, 94.99)],
}


def test_solved_plans_pass(solved_plans):
    for label, fd, plan in solved_plans:
        rep = validate_plan(fd, plan)
        assert rep.verdict == "pass", (label, rep.to_text())


def test_closure_state_table():
    assert [closure_state(n, False) for n in (0, 1, 2)] == [1, 2, 4]
    assert closure_state(0, True) == 5


def test_mutations_caught(solved_plans):
    seen = set()
    for label, fd, plan in solved_plans:
        for t, sw, why, bad in mutations(fd, plan):
            assert mutation_caught(fd, bad, t, sw), (label, t, sw, why)
            seen.add(why)
    assert seen == {"both sides dead", "ESW between live sides", "reopened"}


def test_fabricated_sync_flag_caught(toy3):
    plan = solve_plan(toy3)
    bad = copy.deepcopy(plan)
    for st in bad.steps:
        for c in st.closures:
            c.sync = not c.sync
    assert validate_plan(toy3, bad).failures("legality")


def test_radiality_on_plans(solved_plans):
    for label, fd, plan in solved_plans:
        assert radiality_violations(fd, plan) == [], label


def test_second_root_caught(toy3):
    plan = solve_plan(toy3)
    bad = copy.deepcopy(plan)
    for st in bad.steps:
        for g in st.gfmi:
            g.is_root = True
    assert validate_plan(toy3, bad).failures("radiality")


def _one_bus_feeder():
    return parse_feeder({
        "buses": [{"id": "1", "phases": "abc", "kind": "gfmi_root"}],
        "lines": [], "loads": [],
        "gfmis": [{"bus": "1", "s_rat_kva": 20000.0, "c_kwh": 20000.0, "h": 4, "d": 1, "kf": 89, "gamma": 0.093}],
        "horizon": {"dt_minutes": 15, "steps": 1},
    })


def _step(t, p_total, f, soc=1.0):
    g = GfmiState("1", [p_total / 3] * 3, [0.0] * 3, soc, f, True)
    return StepRecord(t=t, blocks_on=["B1"], gfmi=[g], block_f_hz={"B1": f})


def test_nadir_slack_for_10mw_step():
    fd = _one_bus_feeder()
    f1 = qss_frequency(FREQ, 10000.0)
    plan = RestorationPlan("one", 15.0, [_step(0, 0.0, 60.0), _step(1, 10000.0, f1)])
    cfg = PlanningConfig(nadir_min=59.7, rocof_min=-5.0)
    fails = [f for f in check_frequency_security(fd, plan, cfg) if f.severity == "fail"]
    assert [f.check for f in fails] == ["nadir"]
    assert fails[0].slack == pytest.approx(-0.0643, abs=1e-4)
    ok = [f for f in check_frequency_security(fd, plan, PlanningConfig(rocof_min=-5.0)) if f.severity == "fail"]
    assert ok == []


def test_soc_corruption_caught(toy2):
    plan = solve_plan(toy2)
    bad = copy.deepcopy(plan)
    bad.steps[2].gfmi[0].soc += 0.01
    fails = validate_plan(toy2, bad).failures("soc")
    assert fails and fails[0].step == 2


def test_served_load_corruption_caught(toy2):
    plan = solve_plan(toy2)
    bad = copy.deepcopy(plan)
    ld = next(iter(bad.steps[3].load_kw))
    bad.steps[3].load_kw[ld] += 5.0
    rep = validate_plan(toy2, bad)
    assert rep.failures("clpu_demand") and rep.failures("balance")


def test_empty_plan_passes(toy4):
    plan = solve_plan(toy4)
    empty = RestorationPlan(plan.feeder, plan.dt_minutes, [plan.steps[0]], settings=plan.settings)
    assert validate_plan(toy4, empty).verdict == "pass"
    m = metrics(empty)
    assert m.customer_hours_mwh == 0 and not m.restored


def test_zero_dispatch_plan_passes():
    doc = cases.toy_two_block(steps=3)
    doc["loads"] = [ld for ld in doc["loads"] if ld["bus"] == "3"]
    fd = parse_feeder(doc)
    f0 = 60.0
    steps = []
    for t in range(4):
        g = GfmiState("1", [0.0] * 3, [0.0] * 3, 1.0, f0, True)
        steps.append(StepRecord(t=t, blocks_on=["B1"], gfmi=[g], block_f_hz={"B1": f0},
                                v_sq={"1": [1.0] * 3, "2": [1.0] * 3}))
    plan = RestorationPlan(fd.name, 15.0, steps)
    rep = validate_plan(fd, plan)
    assert rep.verdict == "pass", rep.to_text()
    assert metrics(plan).customer_hours_mwh == 0


def test_report_serialization(toy2):
    plan = solve_plan(toy2)
    rep = validate_plan(toy2, plan)
    d = json.loads(rep.to_json())
    assert d["verdict"] == "pass"
    assert len(rep.to_text().splitlines()) >= len(rep.findings)


def test_sync_semantics_on_plans(solved_plans):
    for label, fd, plan in solved_plans:
        assert sync_violations(fd, plan) == [], label


@pytest.mark.parametrize("cell", sorted(TABLE))
def test_accuracy_formula_reproduces_table(cell):
    ref = 0.0 if cell == "rocof" else 60.0
    for meas, est, acc in TABLE[cell]:
        assert accuracy_pct(meas, est, ref) == pytest.approx(acc, abs=0.02)


def test_simulation_accuracy_floor():
    rows = verify_frequency_estimates(FREQ, [1000.0, 2000.0, 10000.0])
    assert min(r.worst for r in rows) >= 92.0
    assert verify_frequency_estimates(FREQ, []) == []


def test_overdamped_params_still_verify():
    p = GfmiParams(s_rat=20000.0, c=20000.0, h=4.0, d=1.0, kf=89.0, gamma=0.0)
    rows = verify_frequency_estimates(p, [1000.0])
    assert rows[0].accuracy_qss > 99
