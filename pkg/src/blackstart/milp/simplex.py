"""Dense bounded-variable two-phase primal simplex.

Meant for oracle-grade checks on desk-sized LPs, not for speed.  Solves::

    min  c @ x
    s.t. A_ub @ x <= b_ub,  A_eq @ x == b_eq,  lb <= x <= ub
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-9
COST_TOL = 1e-9
DEGENERATE_STREAK = 50


@dataclass
class LpResult:
    status: str  # optimal | infeasible | unbounded | error
    x: np.ndarray | None
    objective: float
    iterations: int = 0


class _Tableau:
    def __init__(self, A, b, cost, upper, basis, at_upper):
        self.T = A  # m x n, holds B^-1 A
        self.beta = b  # basic values
        self.upper = upper  # n upper bounds (lower are all zero)
        self.basis = basis
        self.at_upper = at_upper  # bool per column, meaningful for nonbasic
        self.set_cost(cost)
        self.iters = 0

    def set_cost(self, cost):
        self.cost = cost
        self.d = cost - cost[self.basis] @ self.T

    def values(self) -> np.ndarray:
        x = np.where(self.at_upper, self.upper, 0.0)
        x[self.basis] = self.beta
        return x

    def run(self, max_iter: int) -> str:
        m, n = self.T.shape
        is_basic = np.zeros(n, bool)
        is_basic[self.basis] = True
        streak = 0
        for _ in range(max_iter):
            d = self.d
            # improving: at lower with d<0, at upper with d>0
            score = np.where(self.at_upper, d, -d)
            score[is_basic] = 0.0
            score[self.upper <= 0] = 0.0
            cand = np.flatnonzero(score > COST_TOL)
            if cand.size == 0:
                return "optimal"
            bland = streak >= DEGENERATE_STREAK
            j = int(cand[0]) if bland else int(cand[np.argmax(score[cand])])
            direction = -1.0 if self.at_upper[j] else 1.0
            col = self.T[:, j] * direction
            # basic i changes by -theta*col[i]
            theta = self.upper[j]
            leave, leave_to_upper = -1, False
            ub_b = self.upper[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                pos = col > PIVOT_TOL
                neg = col < -PIVOT_TOL
                r_lo = np.where(pos, self.beta / np.where(pos, col, 1.0), np.inf)
                r_hi = np.where(neg & np.isfinite(ub_b), (ub_b - self.beta) / np.where(neg, -col, 1.0), np.inf)
            r_lo = np.maximum(r_lo, 0.0)
            r_hi = np.maximum(r_hi, 0.0)
            if r_lo.size:
                i_lo, i_hi = int(np.argmin(r_lo)), int(np.argmin(r_hi))
                t_lo, t_hi = r_lo[i_lo], r_hi[i_hi]
                if bland:
                    # smallest basic index among ties
                    t_min = min(t_lo, t_hi)
                    ties = np.flatnonzero((r_lo <= t_min + 1e-12) | (r_hi <= t_min + 1e-12))
                    if ties.size and t_min < theta:
                        i = int(ties[np.argmin(np.asarray(self.basis)[ties])])
                        leave, leave_to_upper = i, bool(r_hi[i] <= t_min + 1e-12 and not r_lo[i] <= t_min + 1e-12)
                        theta = t_min
                else:
                    if t_lo <= t_hi and t_lo < theta:
                        theta, leave, leave_to_upper = t_lo, i_lo, False
                    elif t_hi < t_lo and t_hi < theta:
                        theta, leave, leave_to_upper = t_hi, i_hi, True
            if not np.isfinite(theta):
                return "unbounded"
            streak = streak + 1 if theta <= 1e-12 else 0
            self.iters += 1
            self.beta -= theta * col
            if leave < 0:
                # bound flip
                self.at_upper[j] = not self.at_upper[j]
                continue
            # pivot column j into row `leave`
            out = self.basis[leave]
            entering_val = (self.upper[j] - theta) if self.at_upper[j] else theta
            piv = self.T[leave, j]
            self.T[leave] /= piv
            colj = self.T[:, j].copy()
            colj[leave] = 0.0
            # rank-one update on the rows that actually change
            rows = np.flatnonzero(colj)
            prow = self.T[leave]
            cols = np.flatnonzero(prow)
            if rows.size and cols.size:
                self.T[np.ix_(rows, cols)] -= np.outer(colj[rows], prow[cols])
            self.d = self.d - self.d[j] * self.T[leave]
            self.beta[leave] = entering_val
            self.basis[leave] = j
            is_basic[j], is_basic[out] = True, False
            self.at_upper[out] = leave_to_upper
            self.at_upper[j] = False
        return "error"


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lb=None, ub=None, max_iter: int = 50000) -> LpResult:
    c = np.asarray(c, float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, float).ravel()
    lb = np.zeros(n) if lb is None else np.asarray(lb, float).copy()
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, float).copy()
    if np.any(lb > ub + 1e-12):
        return LpResult("infeasible", None, np.nan)

    # substitute x = lb + y (finite lb), x = ub - y (only ub finite), x = y+ - y- (free)
    cols, shift = [], np.zeros(n)
    new_c, new_u = [], []
    for j in range(n):
        if np.isfinite(lb[j]):
            cols.append((j, 1.0))
            shift[j] = lb[j]
            new_u.append(ub[j] - lb[j])
            new_c.append(c[j])
        elif np.isfinite(ub[j]):
            cols.append((j, -1.0))
            shift[j] = ub[j]
            new_u.append(np.inf)
            new_c.append(-c[j])
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
            new_u += [np.inf, np.inf]
            new_c += [c[j], -c[j]]
    S = np.zeros((n, len(cols)))
    for k, (j, s) in enumerate(cols):
        S[j, k] = s

    A = np.vstack([A_ub, A_eq]) @ S
    b = np.concatenate([b_ub - A_ub @ shift, b_eq - A_eq @ shift])
    m_ub, m = A_ub.shape[0], A_ub.shape[0] + A_eq.shape[0]
    ny = len(cols)
    # slacks for <= rows
    slack = np.zeros((m, m_ub))
    slack[np.arange(m_ub), np.arange(m_ub)] = 1.0
    A = np.hstack([A, slack])
    upper = np.concatenate([new_u, np.full(m_ub, np.inf)])
    cost2 = np.concatenate([new_c, np.zeros(m_ub)])
    neg = b < 0
    A[neg] *= -1
    b = np.abs(b)
    # slack seeds the basis on <= rows that were not negated, artificials elsewhere
    art_rows = [i for i in range(m) if i >= m_ub or neg[i]]
    n_art = len(art_rows)
    art = np.zeros((m, n_art))
    for k, i in enumerate(art_rows):
        art[i, k] = 1.0
    nbase = A.shape[1]
    art_cols = list(range(nbase, nbase + n_art))
    basis_full = [0] * m
    it = iter(art_cols)
    for i in range(m):
        if i < m_ub and not neg[i]:
            basis_full[i] = ny + i
        else:
            basis_full[i] = next(it)
    A = np.hstack([A, art])
    upper = np.concatenate([upper, np.full(n_art, np.inf)])
    at_upper = np.zeros(A.shape[1], bool)
    cost1 = np.zeros(A.shape[1])
    cost1[art_cols] = 1.0
    tab = _Tableau(A.copy(), b.copy(), cost1, upper, basis_full, at_upper)
    iters = 0
    if n_art:
        st = tab.run(max_iter)
        iters += tab.iters
        if st == "error":
            return LpResult("error", None, np.nan, iters)
        infeas = float(tab.values()[art_cols].sum())
        if infeas > 1e-7 * max(1.0, float(np.abs(b).max(initial=0.0))):
            return LpResult("infeasible", None, np.nan, iters)
        # artificials are pinned at zero for phase 2
        tab.upper[art_cols] = 0.0
        tab.at_upper[art_cols] = False
    tab.set_cost(np.concatenate([cost2, np.zeros(n_art)]))
    tab.iters = 0
    st = tab.run(max_iter)
    iters += tab.iters
    if st != "optimal":
        return LpResult(st, None, np.nan, iters)
    y = tab.values()[:ny]
    x = S @ y + shift
    return LpResult("optimal", x, float(c @ x), iters)
