"""Acceptance gate. Each test records one ``<id> PASS|FAIL|SKIP detail`` line.

The lines are printed at the end of the run by the terminal summary hook in
conftest.py, and also echoed to stdout (visible with ``-s``).
"""
import math
import time
import warnings

import pytest

from blackstart import cases
from blackstart.clpu import ClpuCoefficients, demand_series
from blackstart.der import nadir_estimate, qss_frequency, rocof_estimate
from blackstart.feeder import parse_feeder
from blackstart.milp import Backend, find_cbc, solve
from blackstart.planner import PlanInfeasible, PlanningConfig, build_model, solve_plan
from blackstart.validator import validate_plan, verify_frequency_estimates
from checks import mccormick_grid_ok, mutation_caught, mutations, radiality_violations, sync_violations
from conftest import FREQ
from models import tiny_milp

import oracle

CRITERIA = ("F1", "F2", "O1", "O2", "V1", "V2", "M1", "M2", "C1", "S1")
RESULTS: dict[str, str] = {}

PICKUPS_KW = (1000.0, 2000.0, 10000.0)
EST_QSS = (59.9666, 59.9333, 59.6666)
EST_NADIR = (59.9635, 59.9272, 59.6357)
EST_ROCOF = (-0.3780, -0.7500, -3.7500)

O1_SEEDS = range(24)
O2_SEEDS = range(24)
TG_SWEEP = (1, 2, 3, 4)


def record(cid, ok, detail, skip=False):
    line = f"{cid} {'SKIP' if skip else ('PASS' if ok else 'FAIL')} {detail}"
    RESULTS[cid] = line
    print(line)
    return ok


def test_f1_closed_form():
    t0 = time.perf_counter()
    qss = [qss_frequency(FREQ, dp) for dp in PICKUPS_KW]
    nad = [nadir_estimate(FREQ, 60.0, dp) for dp in PICKUPS_KW]
    roc = [rocof_estimate(FREQ, dp) for dp in PICKUPS_KW]
    dt = time.perf_counter() - t0
    e_q = max(abs(a - b) for a, b in zip(qss, EST_QSS))
    e_n = max(abs(a - b) for a, b in zip(nad, EST_NADIR))
    e_r = max(abs(roc[i] - EST_ROCOF[i]) for i in (1, 2))
    e_r1 = abs(roc[0] - EST_ROCOF[0])
    ok = e_q <= 1e-3 and e_n <= 2e-3 and e_r <= 1e-3 and e_r1 <= 3e-2 and dt < 1.0
    assert record("F1", ok, f"qss err {e_q:.2e}, nadir err {e_n:.2e}, rocof err {e_r:.2e} "
                            f"(1 MW {roc[0]:.4f} vs {EST_ROCOF[0]}), {dt * 1e3:.1f} ms")


def test_f2_simulation_accuracy():
    t0 = time.perf_counter()
    rows = verify_frequency_estimates(FREQ, PICKUPS_KW)
    dt = time.perf_counter() - t0
    accs = [a for r in rows for a in (r.accuracy_rocof, r.accuracy_nadir, r.accuracy_qss)]
    ok = len(accs) == 9 and min(accs) >= 92.0 and dt < 10.0
    assert record("F2", ok, f"min accuracy {min(accs):.2f}% over {len(accs)} cells, {dt:.2f} s")


def test_o1_exhaustive_matches_brute_force():
    t0 = time.perf_counter()
    bad, n = [], 0
    for s in O1_SEEDS:
        fd = parse_feeder(cases.random_toy(s))
        try:
            got = solve_plan(fd).objective
        except PlanInfeasible:
            got = None
        want, _ = oracle.brute_force(fd)
        n += 1
        if got is None or want is None:
            if got is not want:
                bad.append((s, got, want))
        elif abs(got - want) > 1e-6 * max(1.0, abs(want)):
            bad.append((s, got, want))
    dt = time.perf_counter() - t0
    ok = n >= 20 and not bad and dt < 300.0
    assert record("O1", ok, f"{n - len(bad)}/{n} random toys agree, {dt:.1f} s" + (f", mismatches {bad}" if bad else ""))


def _both_modes(fd):
    out = {}
    for mode in ("optimal", "rule_based"):
        try:
            out[mode] = solve_plan(fd, PlanningConfig(sync_mode=mode)).metrics
        except PlanInfeasible:
            out[mode] = None
    return out["optimal"], out["rule_based"]


def _eligible(fd):
    return (fd.tg is not None and fd.tg.recovery_step is not None and fd.tg.recovery_step <= fd.horizon.steps
            and any(s.switch == "SSW" for s in fd.switches))


def _minutes(m):
    return math.inf if m.restoration_time_min is None else m.restoration_time_min


def test_o2_optimal_beats_rule_based():
    instances = [("toy4", cases.toy_four_block())]
    instances += [(f"random{s}", cases.random_toy(s)) for s in O2_SEEDS]
    instances += [(f"toy3tg/r={r}", cases.toy_three_block_tg(tg_recovery_step=r)) for r in TG_SWEEP]
    bad, gains, n = [], {}, 0
    for label, doc in instances:
        fd = parse_feeder(doc)
        if not _eligible(fd):
            continue
        opt, rule = _both_modes(fd)
        if opt is None or rule is None:
            continue
        n += 1
        if opt.customer_hours_mwh < rule.customer_hours_mwh - 1e-9 or _minutes(opt) > _minutes(rule):
            bad.append(label)
        if label.startswith("toy3tg"):
            gains[label] = (opt.customer_hours_mwh - rule.customer_hours_mwh) / rule.customer_hours_mwh
    trend = [gains[f"toy3tg/r={r}"] for r in TG_SWEEP if f"toy3tg/r={r}" in gains]
    monotone = len(trend) == len(TG_SWEEP) and all(b >= a - 1e-12 for a, b in zip(trend, trend[1:]))
    positive = trend and trend[-1] > 0
    ok = n > 0 and not bad and monotone and positive
    assert record("O2", ok, f"{n} eligible instances, violations {bad or 'none'}; improvement vs TG recovery step "
                            + ", ".join(f"{r}:{g:+.2%}" for r, g in zip(TG_SWEEP, trend)))


def test_v1_validator(solved_plans):
    failed = [lb for lb, fd, plan in solved_plans if validate_plan(fd, plan).verdict != "pass"]
    n_mut, missed = 0, []
    for lb, fd, plan in solved_plans:
        for t, sw, why, bad in mutations(fd, plan):
            n_mut += 1
            if not mutation_caught(fd, bad, t, sw):
                missed.append((lb, t, sw, why))
    ok = not failed and not missed and n_mut > 0
    assert record("V1", ok, f"{len(solved_plans) - len(failed)}/{len(solved_plans)} plans pass, "
                            f"{n_mut - len(missed)}/{n_mut} illegal mutations caught")


def test_v2_radiality(solved_plans):
    viol = {lb: v for lb, fd, plan in solved_plans if (v := radiality_violations(fd, plan))}
    steps = sum(len(plan.steps) for _, _, plan in solved_plans)
    assert record("V2", not viol, f"{steps} steps over {len(solved_plans)} plans, "
                                  f"{sum(map(len, viol.values()))} violations {list(viol)[:3] if viol else ''}".rstrip())


def test_m1_mccormick_grid():
    ok = mccormick_grid_ok()
    assert record("M1", ok, "w = delta*x on the 2 x 51 grid, both objective senses")


def test_m2_external_solver():
    if find_cbc() is None:
        warnings.warn("no external MILP solver found; M2 skipped")
        record("M2", True, "no external solver on this machine", skip=True)
        pytest.skip("no external solver")
    be = Backend.parse("cbc")
    models = [tiny_milp(s) for s in range(14)]
    for doc, steps in [(cases.toy_two_block(), 2), (cases.toy_two_block(), 3), (cases.toy_three_block(), 2),
                       (cases.toy_three_block(), 3), (cases.toy_four_block(), 2),
                       (cases.toy_four_block(tg_recovery_step=1), 3)]:
        m, _ = build_model(parse_feeder(doc), PlanningConfig(horizon_steps=steps, quad_mode="polygon"))
        models.append(m)
    bad = []
    for m in models:
        a, b = solve(m), solve(m, be)
        if a.status != b.status or (a.ok and abs(a.objective - b.objective) > 1e-6 * max(1.0, abs(a.objective))):
            bad.append(m.name)
    assert record("M2", not bad, f"{len(models) - len(bad)}/{len(models)} models agree (CBC vs exhaustive)"
                                 + (f", mismatches {bad}" if bad else ""))


def test_c1_clpu_staircase():
    got = demand_series([100.0] * 5, [1] * 5, ClpuCoefficients(0.8, 0.4, 0.15))
    assert record("C1", got == [180.0, 140.0, 115.0, 100.0, 100.0], f"demand {got}")


def test_s1_synchronization(solved_plans):
    viol = {lb: v for lb, fd, plan in solved_plans if (v := sync_violations(fd, plan))}
    n_sync = sum(c.sync for _, _, plan in solved_plans for st in plan.steps for c in st.closures)
    ok = not viol and n_sync > 0
    assert record("S1", ok, f"{n_sync} sync closures over {len(solved_plans)} plans, "
                            f"{sum(map(len, viol.values()))} violations")
