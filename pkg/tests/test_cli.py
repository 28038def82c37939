import json
from pathlib import Path

import pytest

from blackstart import cases
from blackstart.cli import EXIT_ERROR, EXIT_FAILED, EXIT_INFEASIBLE, EXIT_OK, main
from blackstart.feeder import dumps_feeder, parse_feeder

GOLDEN = Path(__file__).parent / "golden"


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def toy_file(tmp_path):
    p = tmp_path / "toy.json"
    p.write_text(dumps_feeder(parse_feeder(cases.toy_three_block())))
    return p


def test_plan_writes_outputs(tmp_path, toy_file):
    out = tmp_path / "opt"
    assert run("plan", "--feeder", toy_file, "--mode", "optimal", "--backend", "exhaustive", "--out", out) == EXIT_OK
    for name in ("plan.json", "plan.csv", "metrics.json"):
        assert (out / name).is_file()
    m = json.loads((out / "metrics.json").read_text())
    assert m["objective_kwh"] == pytest.approx(164.75)
    assert m["mode"] == "optimal"


def test_rule_based_not_better(tmp_path, toy_file):
    run("plan", "--feeder", toy_file, "--out", tmp_path / "a")
    run("plan", "--feeder", toy_file, "--mode", "rule-based", "--out", tmp_path / "b")
    a = json.loads((tmp_path / "a" / "metrics.json").read_text())
    b = json.loads((tmp_path / "b" / "metrics.json").read_text())
    assert b["mode"] == "rule_based"
    assert b["objective_kwh"] <= a["objective_kwh"]


def test_missing_feeder(tmp_path, capsys):
    assert run("plan", "--feeder", tmp_path / "nope.json", "--out", tmp_path) == EXIT_ERROR
    assert "not found" in capsys.readouterr().err


def test_unknown_builtin(tmp_path):
    assert run("plan", "--feeder", "builtin:nope", "--out", tmp_path) == EXIT_ERROR


def test_infeasible_exit(tmp_path):
    doc = cases.toy_two_block(steps=3)
    doc["loads"].append({"bus": "1", "phase": "a", "pf_angle": 0.3, "profile": [300.0] * 3})
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    assert run("plan", "--feeder", p, "--out", tmp_path) == EXIT_INFEASIBLE
    rep = json.loads((tmp_path / "infeasible.json").read_text())
    assert "clpu" in rep["report"]["families"]


def test_validate_pass_and_fail(tmp_path, toy_file):
    run("plan", "--feeder", toy_file, "--out", tmp_path)
    plan = tmp_path / "plan.json"
    assert run("validate", "--feeder", toy_file, "--plan", plan, "--out", tmp_path / "v") == EXIT_OK
    assert json.loads((tmp_path / "v" / "validation.json").read_text())["verdict"] == "pass"
    d = json.loads(plan.read_text())
    d["steps"][2]["gfmi"][0]["soc"] += 0.01
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(d))
    assert run("validate", "--feeder", toy_file, "--plan", bad, "--out", tmp_path / "w") == EXIT_FAILED
    assert json.loads((tmp_path / "w" / "validation.json").read_text())["verdict"] == "fail"


def test_validate_malformed_plan(tmp_path, toy_file):
    p = tmp_path / "junk.json"
    p.write_text("{\"steps\": 3}")
    assert run("validate", "--feeder", toy_file, "--plan", p, "--out", tmp_path) == EXIT_ERROR
    p.write_text("not json")
    assert run("validate", "--feeder", toy_file, "--plan", p, "--out", tmp_path) == EXIT_ERROR


def test_freq_verify_default(tmp_path):
    assert run("freq-verify", "--out", tmp_path) == EXIT_OK
    rows = (tmp_path / "freq_verify.csv").read_text().strip().splitlines()
    assert len(rows) == 4
    est_qss = [float(r.split(",")[8]) for r in rows[1:]]
    assert est_qss == pytest.approx([59.9666, 59.9333, 59.6666], abs=1e-3)
    for mw in ("1", "2", "10"):
        assert (tmp_path / f"trajectory_{mw}MW.csv").is_file()


def test_freq_verify_empty_and_overdamped(tmp_path, capsys):
    assert run("freq-verify", "--pickups-mw", "", "--out", tmp_path / "e") == EXIT_OK
    assert len((tmp_path / "e" / "freq_verify.csv").read_text().strip().splitlines()) == 1
    prm = tmp_path / "p.json"
    prm.write_text(json.dumps({"s_rat_kva": 20000, "c_kwh": 20000, "h": 4, "d": 1, "kf": 89, "gamma": 0.0}))
    capsys.readouterr()
    assert run("freq-verify", "--params", prm, "--pickups-mw", "1", "--out", tmp_path / "o") == EXIT_OK
    assert "gamma = 0" in capsys.readouterr().out


def test_emit_model_census_and_golden(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"horizon_steps": 2}))
    out = tmp_path / "m"
    assert run("emit-model", "--feeder", "builtin:toy2", "--config", cfg, "--quad-mode", "polygon",
               "--mps", "--out", out) == EXIT_OK
    census = json.loads((out / "census.json").read_text())
    assert len(census["families"]) == 18
    assert (out / "model.mps").is_file()
    assert (out / "model.lp").read_text() == (GOLDEN / "toy2_T2_polygon.lp").read_text()


def test_emit_model_refuses_quadratic_mps(tmp_path, capsys):
    assert run("emit-model", "--feeder", "builtin:toy2", "--mps", "--out", tmp_path) == EXIT_ERROR
    assert "refused" in capsys.readouterr().err
    assert (tmp_path / "model.lp").is_file() and not (tmp_path / "model.mps").exists()


def test_report_sweep(tmp_path):
    out = tmp_path / "r"
    assert run("report", "--feeder", "builtin:toy4", "--tg-recovery-sweep", "1:2", "--jobs", "2", "--out", out) == EXIT_OK
    rows = json.loads((out / "report.json").read_text())
    assert [r["tg_recovery_step"] for r in rows] == [1, 2]
    for r in rows:
        assert r["optimal_mwh"] >= r["rule_based_mwh"] - 1e-9


def test_plan_is_reproducible(tmp_path):
    run("plan", "--feeder", "builtin:random", "--seed", 5, "--out", tmp_path / "a")
    run("plan", "--feeder", "builtin:random", "--seed", 5, "--out", tmp_path / "b")
    assert (tmp_path / "a" / "plan.json").read_text() == (tmp_path / "b" / "plan.json").read_text()
