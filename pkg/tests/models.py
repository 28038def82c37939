"""Seeded tiny MILPs with a known feasible point, used for cross-solver checks."""
import numpy as np

from blackstart.milp import LinExpr, ModelIR


def tiny_milp(seed: int) -> ModelIR:
    rng = np.random.default_rng(seed)
    nb, nc = int(rng.integers(2, 6)), int(rng.integers(1, 4))
    m = ModelIR(f"tiny{seed}")
    xb = [m.binary(f"y[{i}]") for i in range(nb)]
    xc = [m.add_var(f"x[{j}]", lb=float(-rng.integers(0, 3)), ub=float(rng.integers(1, 6))) for j in range(nc)]
    names = xb + xc
    # a point every row admits, so the model is never infeasible
    pt = {v: float(rng.integers(0, 2)) for v in xb}
    pt.update({v: float(rng.uniform(m.vars[v].lb, m.vars[v].ub)) for v in xc})
    for r in range(int(rng.integers(2, 5))):
        coef = {v: float(rng.integers(-5, 6)) for v in names if rng.random() < 0.7}
        if not coef:
            continue
        lhs = LinExpr(coef)
        m.le(lhs, round(lhs.value(pt) + float(rng.uniform(0, 3)), 3), f"r{r}")
    if rng.random() < 0.5:
        j = xc[0]
        m.eq(LinExpr({j: 1.0, xb[0]: 1.0}), pt[j] + pt[xb[0]], "link")
    obj = LinExpr({v: float(rng.integers(-4, 9)) for v in names})
    m.maximize(obj)
    return m
