"""Brute-force restoration oracle for tiny feeders.

Independent of the planner: it enumerates every legal discrete trajectory
(switch closures and switchable-load pickups, step by step, from the switch
state table and the bus-block rules), scores each one with the cold-load
staircase, and checks continuous feasibility of the best ones with a convex
program written directly in cvxpy.  The first feasible trajectory in score
order is optimal because the served energy is fixed by the discrete choice.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import cvxpy as cp
import networkx as nx
import numpy as np
import scipy.sparse as sp

PV_Q = 0.484

DEFAULTS = dict(
    qss_lo=59.5, qss_hi=60.5, nadir_min=59.3, nadir_max=60.7, rocof_min=-2.0, rocof_max=2.0,
    v_min_sq=0.9025, v_max_sq=1.1025, big_m_f=61.0, eps_p=1.0, eps_q=1.0, eps_f=0.01,
    eps_v=0.01, soc_min=0.2, dfs_max=0.5,
)


@dataclass
class Trajectory:
    closed: list[frozenset]  # index t = 0..T
    live: list[frozenset]  # energized blocks
    loads_on: list[frozenset]  # switchable loads on
    score: float  # served kWh


def tg_status(fd, t):
    return int(fd.tg is not None and fd.tg.recovery_step is not None and t >= fd.tg.recovery_step)


def _forest(fd, live, closed):
    g = nx.MultiGraph()
    g.add_nodes_from(live)
    for s in closed:
        g.add_edge(*fd.adjacency[s])
    return g.number_of_edges() == g.number_of_nodes() - nx.number_connected_components(g)


def _components(fd, live, closed):
    g = nx.Graph()
    g.add_nodes_from(live)
    for s in closed:
        a, b = fd.adjacency[s]
        g.add_edge(a, b)
    return nx.number_connected_components(g)


def demand(fd, ld, status, t, alphas):
    """Cold-load staircase: status[k] is the on/off flag at step k (0 for k <= 0)."""
    y = lambda k: status[k] if k >= 1 else 0
    a1, a2, a3 = alphas
    m = y(t) + a1 * (y(t) - y(t - 1)) + a2 * (y(t - 1) - y(t - 2)) + a3 * (y(t - 2) - y(t - 3))
    return m * ld.profile[t - 1]


def enumerate_trajectories(fd):
    T = fd.horizon.steps
    src = set(fd.source_blocks.values())
    tgb = fd.tg_block
    sw_ids = [s.id for s in fd.switches]
    kind = {s.id: s.switch for s in fd.switches}
    sloads = [ld for ld in fd.loads if ld.switchable]
    out = []

    def live_at(t, closed):
        live = set(src)
        if tgb and tg_status(fd, t):
            live.add(tgb)
        for s in closed:
            live.update(fd.adjacency[s])
        return frozenset(live)

    def rec(t, closed_hist, live_hist, load_hist):
        if t > T:
            out.append(Trajectory(list(closed_hist), list(live_hist), list(load_hist), 0.0))
            return
        prev_c, prev_l = closed_hist[-1], live_hist[-1]
        open_now = [s for s in sw_ids if s not in prev_c]
        for k in range(len(open_now) + 1):
            for new in itertools.combinations(open_now, k):
                ok = True
                for s in new:
                    a, b = fd.adjacency[s]
                    n_live = (a in prev_l) + (b in prev_l)
                    if n_live == 0 or (n_live == 2 and kind[s] == "ESW"):
                        ok = False
                        break
                    if tgb in (a, b) and not tg_status(fd, t - 1):
                        ok = False
                        break
                if not ok:
                    continue
                closed = prev_c | frozenset(new)
                live = live_at(t, closed)
                if tgb and tgb in live and not tg_status(fd, t):
                    continue
                # a dead block is fed through exactly one fresh switch
                dead_fed = {}
                for s in new:
                    for blk in fd.adjacency[s]:
                        if blk not in prev_l:
                            dead_fed[blk] = dead_fed.get(blk, 0) + 1
                if any(v > 1 for v in dead_fed.values()):
                    continue
                if not _forest(fd, live, closed):
                    continue
                live_buses = {b for blk in live for b in fd.block_map[blk].buses}
                prev_on = load_hist[-1]
                cand = [ld.id for ld in sloads if ld.id not in prev_on and ld.bus in live_buses]
                for kk in range(len(cand) + 1):
                    for picks in itertools.combinations(cand, kk):
                        rec(t + 1, closed_hist + [closed], live_hist + [live], load_hist + [prev_on | frozenset(picks)])

    live0 = frozenset(src)
    rec(1, [frozenset()], [live0], [frozenset()])
    alphas = (fd.clpu.alpha1, fd.clpu.alpha2, fd.clpu.alpha3)
    dt_h = fd.horizon.dt_minutes / 60.0
    for tr in out:
        tr.score = sum(pd for pds in served_kw(fd, tr, alphas).values() for pd in pds) * dt_h
    return out


def load_flags(fd, tr):
    T = len(tr.live) - 1
    flags = {}
    for ld in fd.loads:
        blk = fd.block_of_bus[ld.bus]
        if ld.switchable:
            flags[ld.id] = [0] + [int(ld.id in tr.loads_on[t]) for t in range(1, T + 1)]
        else:
            flags[ld.id] = [0] + [int(blk in tr.live[t]) for t in range(1, T + 1)]
    return flags


def served_kw(fd, tr, alphas):
    T = len(tr.live) - 1
    flags = load_flags(fd, tr)
    return {ld.id: [demand(fd, ld, flags[ld.id], t, alphas) for t in range(1, T + 1)] for ld in fd.loads}


def _rx(fd, ln):
    a = np.exp(-2j * np.pi / 3)
    ph = "abc"
    rot = np.array([[1, a * a, a], [a, 1, a * a], [a * a, a, 1]])
    idx = [ph.index(p) for p in ln.phases]
    z = np.conj(ln.impedance()) * rot[np.ix_(idx, idx)]
    kv = fd.base_kv_ln
    return np.real(z) / (kv * kv * 1000.0), -np.imag(z) / (kv * kv * 1000.0)


class _Prog:
    """Sparse LP/SOCP assembled row by row; rows are {name: coef} dicts."""

    def __init__(self):
        self.idx = {}
        self.eq, self.le, self.disks = [], [], []

    def var(self, name):
        return self.idx.setdefault(name, len(self.idx))

    def add_eq(self, terms, rhs):
        self.eq.append(({self.var(k): c for k, c in terms.items()}, rhs))

    def add_le(self, terms, rhs):
        self.le.append(({self.var(k): c for k, c in terms.items()}, rhs))

    def box(self, name, lo, hi):
        self.add_le({name: 1.0}, hi)
        self.add_le({name: -1.0}, -lo)

    def disk(self, a, b, r):
        self.disks.append((self.var(a), self.var(b), r))

    def _mat(self, rows):
        data, ri, ci = [], [], []
        for k, (terms, _) in enumerate(rows):
            for j, c in terms.items():
                ri.append(k)
                ci.append(j)
                data.append(c)
        a = sp.csr_matrix((data, (ri, ci)), shape=(len(rows), len(self.idx)))
        return a, np.array([r for _, r in rows], float)

    def feasible(self) -> bool:
        x = cp.Variable(len(self.idx))
        cons = []
        if self.eq:
            a, b = self._mat(self.eq)
            cons.append(a @ x == b)
        if self.le:
            a, b = self._mat(self.le)
            cons.append(a @ x <= b)
        if self.disks:
            i = [d[0] for d in self.disks]
            j = [d[1] for d in self.disks]
            r = np.array([d[2] for d in self.disks])
            cons.append(cp.SOC(r, cp.vstack([x[i], x[j]]), axis=0))
        prob = cp.Problem(cp.Minimize(0), cons)
        try:
            prob.solve(solver=cp.CLARABEL)
        except cp.SolverError:
            prob.solve(solver=cp.ECOS)
        return prob.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)


def feasible(fd, tr, opts=None) -> bool:
    """Does some dispatch realize trajectory ``tr``?"""
    o = dict(DEFAULTS, **(opts or {}))
    T = len(tr.live) - 1
    dt_h = fd.horizon.dt_minutes / 60.0
    alphas = (fd.clpu.alpha1, fd.clpu.alpha2, fd.clpu.alpha3)
    pd = served_kw(fd, tr, alphas)
    big_m = sum(g.s_rat for g in fd.gfmis.values()) + (fd.tg.ss_rat if fd.tg else 0.0)
    big_m += (1 + PV_Q) * sum(pv.rated_kw for pv in fd.pvs)
    gf = sorted(fd.gfmis)
    tgb = fd.tg_block
    lp = _Prog()
    for t in range(1, T + 1):
        live, closed = tr.live[t], tr.closed[t]
        on_bus = {b for blk in live for b in fd.block_map[blk].buses}
        on_prev = {b for blk in tr.live[t - 1] for b in fd.block_map[blk].buses}
        yt = tg_status(fd, t)
        merges = (_components(fd, tr.live[t - 1], tr.closed[t - 1]) + yt - tg_status(fd, t - 1)
                  - _components(fd, live, closed))
        bal = {(b.id, n): ({}, {}, [0.0, 0.0]) for b in fd.buses for n in b.phases}

        def inj(bus, n, name, c, kind):
            terms = bal[bus, n][0 if kind == "p" else 1]
            terms[name] = terms.get(name, 0.0) + c

        for b in fd.buses:
            for n in b.phases:
                if b.id in on_bus:
                    lp.box(("v", b.id, n, t), o["v_min_sq"], o["v_max_sq"])
                else:
                    lp.add_eq({("v", b.id, n, t): 1.0}, 0.0)
        for blk in fd.blocks:
            if blk.id in live:
                lp.box(("f", blk.id, t), 0.0, o["big_m_f"])
            else:
                lp.add_eq({("f", blk.id, t): 1.0}, 0.0)
        for ln in fd.lines:
            on = (ln.id in closed) if ln.is_switch else (fd.block_of_bus[ln.from_bus] in live)
            sync = (on and ln.switch == "SSW" and ln.id not in tr.closed[t - 1]
                    and all(blk in tr.live[t - 1] for blk in fd.adjacency[ln.id]))
            for n in ln.phases:
                for kind in ("P", "Q"):
                    name = (kind, ln.id, n, t)
                    lim = 0.0 if not on else (o["eps_p" if kind == "P" else "eps_q"] if sync else big_m)
                    lp.box(name, -lim, lim)
                    k = kind.lower()
                    inj(ln.to_bus, n, name, 1.0, k)
                    inj(ln.from_bus, n, name, -1.0, k)
            if not on:
                continue
            if ln.is_switch:
                for n in ln.phases:
                    gap = {("v", ln.to_bus, n, t): 1.0, ("v", ln.from_bus, n, t): -1.0}
                    e = o["eps_v"] if sync else 0.0
                    lp.add_le(gap, e)
                    lp.add_le({k: -c for k, c in gap.items()}, e)
                a, b = fd.adjacency[ln.id]
                lp.add_le({("f", a, t): 1.0, ("f", b, t): -1.0}, o["eps_f"])
                lp.add_le({("f", a, t): -1.0, ("f", b, t): 1.0}, o["eps_f"])
            else:
                rb, xb = _rx(fd, ln)
                for i, n in enumerate(ln.phases):
                    row = {("v", ln.to_bus, n, t): 1.0, ("v", ln.from_bus, n, t): -1.0}
                    for k, m in enumerate(ln.phases):
                        row[("P", ln.id, m, t)] = 2 * rb[i, k]
                        row[("Q", ln.id, m, t)] = 2 * xb[i, k]
                    lp.add_eq(row, 0.0)
        for g in gf:
            prm = fd.gfmis[g]
            phases = fd.bus_map[g].phases
            cap = prm.s_rat / 3.0
            vs2 = prm.v_star ** 2
            lp.box(("dvcc", g, t), o["v_min_sq"] - vs2, o["v_max_sq"] - vs2)
            lp.box(("dfs", g, t), -o["dfs_max"], o["dfs_max"])
            for n in phases:
                lp.add_eq({("v", g, n, t): 1.0, ("dvcc", g, t): -1.0}, vs2)
                lp.box(("v", g, n, t), (0.95 * prm.v_star) ** 2, (1.05 * prm.v_star) ** 2)
                lp.box(("p", g, n, t), -cap, cap)
                lp.box(("q", g, n, t), -cap, cap)
                lp.disk(("p", g, n, t), ("q", g, n, t), cap)
                inj(g, n, ("p", g, n, t), 1.0, "p")
                inj(g, n, ("q", g, n, t), 1.0, "q")
            k = prm.d + prm.kf
            ptot = {("p", g, n, t): 1.0 for n in phases}
            # fg = f* - ptot f*/(S k) + merges * dfs
            fg = {("fg", g, t): 1.0, ("dfs", g, t): -float(merges)}
            fg.update({key: prm.f_star / (prm.s_rat * k) for key in ptot})
            lp.add_eq(fg, prm.f_star)
            lp.box(("fg", g, t), max(o["qss_lo"], 0.0), min(o["qss_hi"], o["big_m_f"]))
            lp.add_eq({("fg", g, t): 1.0, ("f", fd.source_blocks[g], t): -1.0}, 0.0)
            # energy drawn so far keeps soc inside [soc_min, 1]
            used = {("p", g, n, s): dt_h / prm.c for n in phases for s in range(1, t + 1)}
            lp.add_le(used, 1.0 - o["soc_min"])
            lp.add_le({key: -c for key, c in used.items()}, 0.0)
            dp = dict(ptot)
            if t > 1:
                for n in phases:
                    dp[("p", g, n, t - 1)] = -1.0
            ro = -prm.f_star / (2 * prm.h * prm.s_rat)
            lp.add_le({key: ro * c for key, c in dp.items()}, o["rocof_max"])
            lp.add_le({key: -ro * c for key, c in dp.items()}, -o["rocof_min"])
            na = (1 + prm.gamma) * prm.f_star / (prm.s_rat * k)
            nadir = {key: -na * c for key, c in dp.items()}
            f0 = prm.f_star
            if t > 1:
                nadir[("fg", g, t - 1)] = 1.0
                f0 = 0.0
            lp.add_le(nadir, o["nadir_max"] - f0)
            lp.add_le({key: -c for key, c in nadir.items()}, f0 - o["nadir_min"])
        for pv in fd.pvs:
            was_on = pv.bus in on_prev
            qmax = PV_Q * pv.rated_kw if was_on else 0.0
            lp.box(("qpv", pv.id, t), -qmax, qmax)
            ppv = pv.profile[t - 1] if was_on else 0.0
            for n in pv.phases:
                bal[pv.bus, n][2][0] += ppv / len(pv.phases)
                inj(pv.bus, n, ("qpv", pv.id, t), 1.0 / len(pv.phases), "q")
        if fd.tg:
            tb = fd.tg.bus
            for n in fd.bus_map[tb].phases:
                lp.box(("ptg", n, t), -big_m * yt, big_m * yt)
                lp.box(("qtg", n, t), -big_m * yt, big_m * yt)
                lp.add_eq({("v", tb, n, t): 1.0}, float(yt))
                inj(tb, n, ("ptg", n, t), 1.0, "p")
                inj(tb, n, ("qtg", n, t), 1.0, "q")
            lp.add_eq({("ptot", t): 1.0, **{("ptg", n, t): -1.0 for n in fd.bus_map[tb].phases}}, 0.0)
            lp.add_eq({("qtot", t): 1.0, **{("qtg", n, t): -1.0 for n in fd.bus_map[tb].phases}}, 0.0)
            lp.disk(("ptot", t), ("qtot", t), fd.tg.ss_rat)
            lp.add_eq({("f", tgb, t): 1.0}, 60.0 * yt)
        for ld in fd.loads:
            d = pd[ld.id][t - 1]
            bal[ld.bus, ld.phase][2][0] -= d
            bal[ld.bus, ld.phase][2][1] -= d * math.tan(ld.pf_angle)
        for (pterms, qterms, const) in bal.values():
            lp.add_eq(pterms, -const[0])
            lp.add_eq(qterms, -const[1])
    return lp.feasible()


def brute_force(fd, opts=None):
    """(best served kWh, trajectory) or (None, None) when nothing is feasible."""
    trs = enumerate_trajectories(fd)
    trs.sort(key=lambda tr: -tr.score)
    for tr in trs:
        if feasible(fd, tr, opts):
            return tr.score, tr
    return None, None
