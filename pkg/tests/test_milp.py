import itertools
import math
import warnings
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from blackstart import cases
from blackstart.feeder import parse_feeder
from blackstart.milp import (
    BigMWarning,
    ExhaustiveLimitError,
    LinExpr,
    ModelError,
    ModelIR,
    add_big_m_switchable,
    emit_lp,
    emit_mps,
    lin_sum,
    mccormick_binary_product,
    quad_capability,
    solve,
)
from blackstart.milp.simplex import solve_lp
from blackstart.milp.solve import parse_solution_text
from blackstart.milp.writers import name_map
from blackstart.planner import PlanningConfig, build_model
from checks import mccormick_grid_ok
from models import tiny_milp

GOLDEN = Path(__file__).parent / "golden"


def _fixed(m, values):
    for k, v in values.items():
        m.fix(k, v)
    return solve(m)


# ------------------------------------------------------------- McCormick


def test_mccormick_grid_exact():
    assert mccormick_grid_ok()
    assert mccormick_grid_ok(0.0, 1.0)


def test_mccormick_needs_bounds():
    m = ModelIR()
    m.binary("d")
    m.add_var("x")
    with pytest.raises(ModelError):
        mccormick_binary_product(m, "d", "x", "w", "mc")


# ------------------------------------------------------------- big-M


def test_big_m_active_and_relaxed():
    m = ModelIR()
    m.binary("y")
    m.add_var("p", lb=-5, ub=5)
    add_big_m_switchable(m, "p", "y", 10.0, "flow")
    m.maximize(LinExpr({"p": 1.0}))
    m.fix("y", 1)
    assert solve(m)["p"] == pytest.approx(0.0)
    m.set_bounds("y", 0, 0)
    assert solve(m)["p"] == pytest.approx(5.0)


def test_big_m_too_small_warns():
    m = ModelIR()
    m.binary("y")
    m.add_var("p", lb=-50, ub=50)
    with pytest.warns(BigMWarning):
        add_big_m_switchable(m, "p", "y", 10.0, "flow")


@pytest.mark.parametrize("seed", range(5))
def test_big_m_relaxation_keeps_optimum(seed):
    # the relaxed copy with y fixed active must equal the plain model
    rng = np.random.default_rng(seed)
    c = rng.integers(-3, 4, size=3).astype(float)
    a = rng.integers(0, 4, size=3).astype(float)
    plain, relaxed = ModelIR(), ModelIR()
    for m in (plain, relaxed):
        for j in range(3):
            m.add_var(f"x{j}", lb=0, ub=4)
        m.maximize(LinExpr({f"x{j}": c[j] for j in range(3)}))
    expr = LinExpr({f"x{j}": a[j] for j in range(3)})
    plain.le(expr, 5.0, "cap")
    relaxed.binary("y")
    relaxed.fix("y", 1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        add_big_m_switchable(relaxed, expr, "y", 100.0, "cap", lo=-100.0, hi=5.0)
    assert solve(relaxed).objective == pytest.approx(solve(plain).objective)


# ------------------------------------------------------------- emitters


def _knap2():
    m = ModelIR("knap2")
    m.binary("a")
    m.binary("b")
    m.le(LinExpr({"a": 6, "b": 4}), 9, "weight")
    m.maximize(LinExpr({"a": 5, "b": 4}))
    return m


def test_knapsack_lp_golden():
    assert emit_lp(_knap2()) == (GOLDEN / "knap2.lp").read_text()


def test_knapsack_mps_golden():
    assert emit_mps(_knap2()) == (GOLDEN / "knap2.mps").read_text()


def test_toy_model_lp_golden():
    fd = parse_feeder(cases.toy_two_block(steps=2))
    m, _ = build_model(fd, PlanningConfig(quad_mode="polygon"))
    assert emit_lp(m) == (GOLDEN / "toy2_T2_polygon.lp").read_text()


def test_empty_model_skeletons():
    lp = emit_lp(ModelIR("empty"))
    assert lp.startswith("\\ Problem: empty") and lp.rstrip().endswith("End")
    assert "Binaries" not in lp
    assert emit_mps(ModelIR("empty")) == "NAME          empty\nROWS\n N  OBJ\nENDATA\n"


def test_mps_markers_iff_binaries():
    m = ModelIR("lin")
    m.add_var("x", ub=1)
    m.maximize("x")
    assert "MARKER" not in emit_mps(m)
    assert emit_mps(_knap2()).count("'MARKER'") == 2


def test_emit_is_deterministic():
    a = emit_lp(tiny_milp(3))
    assert a == emit_lp(tiny_milp(3))


def test_quadratic_lp_syntax_and_mps_refusal():
    m = ModelIR("q")
    m.add_var("p", lb=-10, ub=10)
    m.add_var("q", lb=-10, ub=10)
    quad_capability(m, "p", "q", 4.0, "quadratic", "cap")
    m.maximize(LinExpr({"p": 1.0, "q": 1.0}))
    assert "cap: [ p ^ 2 + q ^ 2 ] <= 16" in emit_lp(m)
    with pytest.raises(ModelError, match="quadratic"):
        emit_mps(m)


def test_name_sanitizing_is_injective():
    m = ModelIR()
    for v in ("p[1,a]", "p_1_a_", "p(1)a"):
        m.add_var(v, ub=1)
    names = name_map(m)
    assert len(set(names.values())) == 3


def test_parse_cbc_solution():
    names = {"y[0]": "y_0_", "x": "x"}
    status, vals = parse_solution_text("Optimal - objective value 3\n 0 y_0_ 1 0\n 1 x 2.5 0\n", names)
    assert status == "optimal" and vals == {"y[0]": 1.0, "x": 2.5}
    assert parse_solution_text("Infeasible - objective value 0\n", names)[0] == "infeasible"
    with pytest.raises(ValueError):
        parse_solution_text("Optimal\n 0 zz 1 0\n", names)


# ------------------------------------------------------------- exhaustive


def test_three_binary_hand_enumeration():
    # max 4a + 3b + 5c  s.t. a + b + c <= 2, a + c <= 1, b - c >= 0
    m = ModelIR("three")
    for v in "abc":
        m.binary(v)
    m.le(LinExpr({"a": 1, "b": 1, "c": 1}), 2, "card")
    m.le(LinExpr({"a": 1, "c": 1}), 1, "pair")
    m.ge(LinExpr({"b": 1, "c": -1}), 0, "imply")
    m.maximize(LinExpr({"a": 4, "b": 3, "c": 5}))
    best = max(
        (4 * a + 3 * b + 5 * c, (a, b, c))
        for a, b, c in itertools.product((0, 1), repeat=3)
        if a + b + c <= 2 and a + c <= 1 and b >= c
    )
    s = solve(m)
    assert s.status == "optimal"
    assert s.objective == best[0] == 8
    assert (s["a"], s["b"], s["c"]) == (0, 1, 1)


def test_all_fixed_returns_point():
    m = ModelIR()
    m.binary("y")
    m.add_var("x", lb=0, ub=5)
    m.le(LinExpr({"x": 1, "y": 1}), 4, "row")
    m.maximize(LinExpr({"x": 2, "y": 3}))
    s = _fixed(m, {"x": 2.0, "y": 1})
    assert s.status == "optimal"
    assert (s["x"], s["y"], s.objective) == (2.0, 1.0, 7.0)


def test_infeasible_status():
    m = ModelIR()
    m.binary("a")
    m.ge("a", 2.0, "impossible")
    m.maximize("a")
    assert solve(m).status == "infeasible"


def test_binary_limit():
    m = ModelIR()
    for i in range(25):
        m.binary(f"b{i}")
    m.maximize(lin_sum(f"b{i}" for i in range(25)))
    with pytest.raises(ExhaustiveLimitError):
        solve(m)


@pytest.mark.parametrize("seed", range(10))
def test_tiny_milps_match_enumeration(seed):
    m = tiny_milp(seed)
    bins = m.binaries
    cont = [v for v in m.vars if v not in bins]
    cidx = {v: k for k, v in enumerate(cont)}
    best = -math.inf
    for combo in itertools.product((0.0, 1.0), repeat=len(bins)):
        fixed = dict(zip(bins, combo))
        A, b, Ae, be = [], [], [], []
        for con in m.constraints:
            row = np.zeros(len(cont))
            rhs = con.rhs
            for v, a in con.terms.items():
                if v in fixed:
                    rhs -= a * fixed[v]
                else:
                    row[cidx[v]] += a
            (Ae if con.kind == "linear-eq" else A).append(row)
            (be if con.kind == "linear-eq" else b).append(rhs)
        c = np.zeros(len(cont))
        for v, a in m.objective.items():
            if v in cidx:
                c[cidx[v]] -= a
        res = linprog(c, A_ub=A or None, b_ub=b or None, A_eq=Ae or None, b_eq=be or None,
                      bounds=[(m.vars[v].lb, m.vars[v].ub) for v in cont], method="highs")
        if res.status == 0:
            best = max(best, m.objective_value({**fixed, **dict(zip(cont, res.x))}))
    s = solve(m)
    assert s.status == "optimal"
    assert s.objective == pytest.approx(best, rel=1e-6, abs=1e-6)
    assert not m.violations(s.values)


# ------------------------------------------------------------- simplex


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_simplex_agrees_with_highs(seed):
    rng = np.random.default_rng(seed)
    n, mu, me = int(rng.integers(1, 6)), int(rng.integers(0, 5)), int(rng.integers(0, 3))
    c = rng.normal(size=n)
    A = rng.normal(size=(mu, n))
    x0 = rng.uniform(-1, 2, size=n)
    b = A @ x0 + rng.uniform(0, 1, size=mu)
    Ae = rng.normal(size=(me, n))
    be = Ae @ x0
    lb = np.where(rng.random(n) < 0.2, -np.inf, np.minimum(x0, 0) - rng.uniform(0, 1, n))
    ub = np.where(rng.random(n) < 0.3, np.inf, np.maximum(x0, 0) + rng.uniform(0, 2, n))
    ref = linprog(c, A_ub=A if mu else None, b_ub=b if mu else None, A_eq=Ae if me else None,
                  b_eq=be if me else None, bounds=list(zip(lb, ub)), method="highs")
    got = solve_lp(c, A, b, Ae, be, lb, ub)
    if ref.status == 3:
        assert got.status == "unbounded"
    else:
        assert ref.status == 0
        assert got.status == "optimal"
        assert got.objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)


def test_simplex_infeasible():
    got = solve_lp([1.0], A_ub=[[1.0]], b_ub=[-1.0], lb=[0.0], ub=[5.0])
    assert got.status == "infeasible"


# ------------------------------------------------------------- capability disk


@pytest.mark.parametrize("mode", ["quadratic", "polygon"])
def test_disk_boundary_points(mode):
    for px, ok in ((4.0, True), (4.04, False)):
        m = ModelIR()
        m.add_var("p", lb=-10, ub=10)
        m.add_var("q", lb=-10, ub=10)
        quad_capability(m, "p", "q", 4.0, mode, "cap")
        m.fix("p", px)
        m.fix("q", 0.0)
        m.maximize("p")
        assert solve(m).ok is ok


def test_polygon_overestimate_bounded():
    m = ModelIR()
    m.add_var("p", lb=-10, ub=10)
    m.add_var("q", lb=-10, ub=10)
    cuts = quad_capability(m, "p", "q", 1.0, "polygon(16)", "cap")
    assert len(cuts) == 16
    worst = 0.0
    for th in np.linspace(0, 2 * math.pi, 20001):
        d = np.array([math.cos(th), math.sin(th)])
        # furthest point of the polygon along d
        reach = min(1.0 / (c.terms.get("p", 0.0) * d[0] + c.terms.get("q", 0.0) * d[1])
                    for c in cuts if c.terms.get("p", 0.0) * d[0] + c.terms.get("q", 0.0) * d[1] > 1e-12)
        worst = max(worst, reach - 1.0)
    bound = 1.0 / math.cos(math.pi / 16) - 1.0
    assert worst <= bound + 1e-12
    assert worst == pytest.approx(bound, rel=1e-3)


def test_polygon_needs_eight_sides():
    m = ModelIR()
    m.add_var("p")
    m.add_var("q")
    with pytest.raises(ModelError):
        quad_capability(m, "p", "q", 1.0, "polygon(6)", "cap")
