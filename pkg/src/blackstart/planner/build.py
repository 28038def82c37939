"""Assemble the blackstart restoration model.

Step ``t = 0`` is the self-start instant: every GFMI block is live and is a
root, everything else is dead and open.  Decisions are taken at
``t = 1..T``; profiles are read at index ``start_step + t - 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import networkx as nx

from ..clpu import ClpuCoefficients
from ..der import PV_Q_RATIO, GfmiParams
from ..feeder import FeederError, FeederModel, block_graph, natural_key
from ..milp import LinExpr, ModelIR, lin_sum, mccormick_binary_product, quad_capability
from .config import PlanningConfig
from .network import line_coefficients

FAMILIES = (
    "gfmi_qss", "gfmi_thermal", "soc", "freq_security", "sync_freq", "pv", "clpu", "esw", "ssw",
    "freq_match", "block", "branch_flow", "nodal_balance", "tg", "radiality", "root_coord",
    "objective", "init",
)


def vid(kind: str, *idx) -> str:
    return f"{kind}[{','.join(str(i) for i in idx)}]"


@dataclass
class ModelIndex:
    """What extraction needs to read a solution back."""

    feeder: FeederModel
    config: PlanningConfig
    steps: int
    dt_minutes: float
    tg_status: list[int]  # index t = 0..T
    variable_blocks: list[str]
    clpu: ClpuCoefficients
    demotion: dict[str, int | None] = field(default_factory=dict)  # rule-based schedule
    big_m_flow: float = 0.0

    @property
    def dt_hours(self) -> float:
        return self.dt_minutes / 60.0

    def profile_index(self, t: int) -> int:
        return self.config.start_step + t - 1


def resolve_horizon(feeder: FeederModel, config: PlanningConfig) -> tuple[int, float, int | None]:
    steps = config.horizon_steps or feeder.horizon.steps
    dt = config.dt_minutes or feeder.horizon.dt_minutes
    rec = feeder.tg.recovery_step if feeder.tg else None
    if config.tg_recovery_step is not None or config.override_tg:
        if feeder.tg is None and config.tg_recovery_step is not None:
            raise FeederError("tg_recovery_step given but the feeder has no TG interconnect")
        rec = config.tg_recovery_step
    if rec is not None and not 1 <= rec <= steps:
        raise FeederError(f"TG recovery step {rec} lies outside the horizon 1..{steps}")
    return steps, dt, rec


def _check_profiles(feeder: FeederModel, config: PlanningConfig, steps: int):
    need = config.start_step + steps
    for ld in feeder.loads:
        if len(ld.profile) < need:
            raise FeederError(f"load {ld.id}: profile has {len(ld.profile)} points, horizon needs {need}")
    for pv in feeder.pvs:
        if len(pv.profile) < need:
            raise FeederError(f"pv {pv.id}: profile has {len(pv.profile)} points, horizon needs {need}")


def default_big_m_flow(feeder: FeederModel) -> float:
    s = sum(g.s_rat for g in feeder.gfmis.values())
    s += feeder.tg.ss_rat if feeder.tg else 0.0
    s += (1.0 + PV_Q_RATIO) * sum(pv.rated_kw for pv in feeder.pvs)
    return max(s, 1.0)


def sync_order(feeder: FeederModel) -> list[str]:
    """GFMI buses ordered by block-graph distance from the TG block."""
    if feeder.tg is None:
        return sorted(feeder.gfmis, key=natural_key)
    g = block_graph(feeder)
    dist = nx.single_source_shortest_path_length(g, feeder.tg_block)
    missing = [b for b, blk in feeder.source_blocks.items() if blk not in dist]
    if missing:
        raise FeederError(f"GFMI(s) {missing} cannot reach the TG block; no synchronization order exists")
    return sorted(feeder.gfmis, key=lambda b: (dist[feeder.source_blocks[b]], natural_key(b)))


def rule_based_schedule(feeder: FeederModel, config: PlanningConfig) -> dict[str, int | None]:
    """Step at which each GFMI stops being a root under the benchmark rule.

    Islands keep their own root until the TG returns at step ``r``; the k-th
    nearest GFMI (k = 1, 2, ...) may hand over from ``r + k`` on, after the
    ones nearer the TG and at most one per step.  ``None`` means the GFMI
    stays a root for the whole horizon.
    """
    steps, _, rec = resolve_horizon(feeder, config)
    order = list(config.rule_order) if config.rule_order else sync_order(feeder)
    if set(order) != set(feeder.gfmis) or len(order) != len(feeder.gfmis):
        raise FeederError("rule_order must list every GFMI bus exactly once")
    out: dict[str, int | None] = {}
    for k, bus in enumerate(order, start=1):
        out[bus] = rec + k if rec is not None and rec + k <= steps else None
    return out


class _Builder:
    def __init__(self, feeder: FeederModel, config: PlanningConfig):
        self.fd = feeder
        self.cfg = config
        self.T, self.dt, rec = resolve_horizon(feeder, config)
        _check_profiles(feeder, config, self.T)
        self.dt_h = self.dt / 60.0
        self.ytg = [int(rec is not None and t >= rec) for t in range(self.T + 1)]
        self.m = ModelIR(feeder.name or "blackstart")
        self.tg_blk = feeder.tg_block
        self.src = {blk: bus for bus, blk in feeder.source_blocks.items()}
        self.var_blocks = [b.id for b in feeder.blocks if b.id not in self.src and b.id != self.tg_blk]
        self.M = config.big_m_flow if config.big_m_flow is not None else default_big_m_flow(feeder)
        self.clpu = config.clpu or feeder.clpu
        self.coef = line_coefficients(feeder)
        self.gfmis = sorted(feeder.gfmis, key=natural_key)
        self.index = ModelIndex(feeder, config, self.T, self.dt, self.ytg, self.var_blocks, self.clpu, big_m_flow=self.M)

    # ---------------------------------------------------------------- helpers
    def blk(self, m: str, t: int) -> LinExpr:
        if m in self.src:
            return LinExpr.of(1.0)
        if m == self.tg_blk:
            return LinExpr.of(float(self.ytg[t]))
        return LinExpr.of(vid("yBB", m, t))

    def yb(self, bus: str, t: int) -> str:
        return vid("yB", bus, t)

    def status(self, line_id: str, t: int) -> str:
        ln = self.fd.line_map[line_id]
        return vid("yL", line_id, t) if ln.is_switch else vid("yLn", line_id, t)

    def prof(self, series, t: int) -> float:
        return float(series[self.cfg.start_step + t - 1])

    # ------------------------------------------------------------- variables
    def declare(self):
        m, fd, T = self.m, self.fd, self.T
        for t in range(T + 1):
            for b in fd.buses:
                m.add_var(self.yb(b.id, t), lb=0.0, ub=1.0, tag="status")
            for blk in self.var_blocks:
                m.add_var(vid("yBB", blk, t), lb=0.0, ub=1.0, tag="status")
            for ln in fd.lines:
                if ln.is_switch:
                    if t == 0:
                        m.add_var(vid("yL", ln.id, 0), lb=0.0, ub=1.0, tag="status")
                    else:
                        m.binary(vid("yL", ln.id, t), tag="switch")
                else:
                    m.add_var(vid("yLn", ln.id, t), lb=0.0, ub=1.0, tag="status")
            for g in self.gfmis:
                prm = fd.gfmis[g]
                if t == 0:
                    m.add_var(vid("yES", g, 0), lb=0.0, ub=1.0, tag="root")
                else:
                    m.binary(vid("yES", g, t), tag="root")
                m.add_var(vid("soc", g, t), lb=self.cfg.soc_min, ub=1.0, tag="soc")
                m.add_var(vid("fg", g, t), lb=0.0, ub=self.cfg.big_m_f, tag="freq")
                cap = prm.s_rat / 3.0
                for n in fd.bus_map[g].phases:
                    m.add_var(vid("p", g, n, t), lb=-cap, ub=cap, tag="dispatch")
                    if t > 0:
                        m.add_var(vid("q", g, n, t), lb=-cap, ub=cap, tag="dispatch")
                if t > 0:
                    vs2 = prm.v_star**2
                    m.add_var(vid("dvcc", g, t), lb=self.cfg.v_min_sq - vs2, ub=self.cfg.v_max_sq - vs2, tag="voltage")
                    m.add_var(vid("delta", g, t), lb=0.0, ub=1.0, tag="sync")
                    m.add_var(vid("dfs", g, t), lb=-self.cfg.delta_f_star_max, ub=self.cfg.delta_f_star_max, tag="sync")
            m.add_var(vid("R", t), lb=1.0, ub=len(self.gfmis) + (1 if fd.tg else 0), tag="radiality")
            if t == 0:
                continue
            for blk in fd.blocks:
                m.add_var(vid("f", blk.id, t), lb=0.0, ub=self.cfg.big_m_f, tag="freq")
            for b in fd.buses:
                for n in b.phases:
                    m.add_var(vid("v", b.id, n, t), lb=0.0, ub=self.cfg.big_m_v, tag="voltage")
            for ln in fd.lines:
                for n in ln.phases:
                    m.add_var(vid("P", ln.id, n, t), lb=-self.M, ub=self.M, tag="flow")
                    m.add_var(vid("Q", ln.id, n, t), lb=-self.M, ub=self.M, tag="flow")
                if ln.switch == "SSW":
                    m.add_var(vid("z", ln.id, t), lb=0.0, ub=1.0, tag="sync")
            for ld in fd.loads:
                if ld.switchable:
                    m.binary(vid("yNL", ld.id, t), tag="load")
                else:
                    m.add_var(vid("yD", ld.id, t), lb=0.0, ub=1.0, tag="load")
                m.add_var(vid("PD", ld.id, t), lb=0.0, ub=math.inf, tag="demand")
            for pv in fd.pvs:
                m.add_var(vid("ppv", pv.id, t), lb=0.0, ub=pv.rated_kw, tag="pv")
                qmax = PV_Q_RATIO * pv.rated_kw
                m.add_var(vid("qpv", pv.id, t), lb=-qmax, ub=qmax, tag="pv")
            if fd.tg:
                for n in fd.bus_map[fd.tg.bus].phases:
                    m.add_var(vid("ptg", n, t), lb=-self.M, ub=self.M, tag="tg")
                    m.add_var(vid("qtg", n, t), lb=-self.M, ub=self.M, tag="tg")
                m.add_var(vid("ptg_tot", t), lb=-math.inf, ub=math.inf, tag="tg")
                m.add_var(vid("qtg_tot", t), lb=-math.inf, ub=math.inf, tag="tg")

    def load_status(self, ld, t: int) -> LinExpr:
        if t <= 0:
            return LinExpr()
        return LinExpr.of(vid("yNL" if ld.switchable else "yD", ld.id, t))

    # --------------------------------------------------------------- families
    def gfmi_families(self):
        m, fd, cfg, T = self.m, self.fd, self.cfg, self.T
        for g in self.gfmis:
            prm: GfmiParams = fd.gfmis[g]
            phases = fd.bus_map[g].phases
            k = prm.d + prm.kf
            for t in range(1, T + 1):
                vs2 = prm.v_star**2
                for n in phases:
                    m.eq(vid("v", g, n, t), LinExpr({vid("dvcc", g, t): 1.0}, vs2), f"gfmi_qss/v/{g}/{n}/{t}")
                    m.le(vid("v", g, n, t), (1.05 * prm.v_star) ** 2, f"gfmi_qss/vmax/{g}/{n}/{t}")
                    m.ge(vid("v", g, n, t), (0.95 * prm.v_star) ** 2, f"gfmi_qss/vmin/{g}/{n}/{t}")
                m.le(vid("fg", g, t), cfg.qss_hi, f"gfmi_qss/fmax/{g}/{t}")
                m.ge(vid("fg", g, t), cfg.qss_lo, f"gfmi_qss/fmin/{g}/{t}")
                for n in phases:
                    quad_capability(m, vid("p", g, n, t), vid("q", g, n, t), prm.s_rat / 3.0, cfg.quad_mode,
                                    f"gfmi_thermal/{g}/{n}/{t}")
                ptot = lin_sum(vid("p", g, n, t) for n in phases)
                prev = lin_sum(vid("p", g, n, t - 1) for n in phases)
                # SoC energy balance, discharge positive
                m.eq(vid("soc", g, t), LinExpr({vid("soc", g, t - 1): 1.0}) - ptot * (self.dt_h / prm.c),
                     f"soc/{g}/{t}")
                dp = ptot - prev
                rocof = dp * (-prm.f_star / (2.0 * prm.h * prm.s_rat))
                m.le(rocof, cfg.rocof_max, f"freq_security/rocof_max/{g}/{t}")
                m.ge(rocof, cfg.rocof_min, f"freq_security/rocof_min/{g}/{t}")
                nadir = LinExpr({vid("fg", g, t - 1): 1.0}) - dp * ((1.0 + prm.gamma) * prm.f_star / (prm.s_rat * k))
                m.le(nadir, cfg.nadir_max, f"freq_security/nadir_max/{g}/{t}")
                m.ge(nadir, cfg.nadir_min, f"freq_security/nadir_min/{g}/{t}")
                # cooperative synchronization: fg = droop + (sum_b delta_b) * dfs_g
                shift = LinExpr()
                for b in self.gfmis:
                    w = vid("w", b, g, t)
                    mccormick_binary_product(m, vid("delta", b, t), vid("dfs", g, t), w, f"sync_freq/w/{b}/{g}/{t}")
                    shift.add(w)
                droop = LinExpr(const=prm.f_star) - ptot * (prm.f_star / (prm.s_rat * k))
                m.eq(vid("fg", g, t), droop + shift, f"sync_freq/f/{g}/{t}")

    def pv_family(self):
        m, fd = self.m, self.fd
        for pv in fd.pvs:
            for t in range(1, self.T + 1):
                on_prev = vid("yB", pv.bus, t - 1)
                m.eq(vid("ppv", pv.id, t), LinExpr({on_prev: self.prof(pv.profile, t)}), f"pv/p/{pv.id}/{t}")
                qmax = PV_Q_RATIO * pv.rated_kw
                m.le(vid("qpv", pv.id, t), LinExpr({on_prev: qmax}), f"pv/qmax/{pv.id}/{t}")
                m.ge(vid("qpv", pv.id, t), LinExpr({on_prev: -qmax}), f"pv/qmin/{pv.id}/{t}")

    def clpu_family(self):
        m, a = self.m, self.clpu
        for ld in self.fd.loads:
            for t in range(1, self.T + 1):
                y = [self.load_status(ld, t - k) for k in range(4)]  # y_t, y_t-1, y_t-2, y_t-3
                mult = y[0] + (y[0] - y[1]) * a.alpha1 + (y[1] - y[2]) * a.alpha2 + (y[2] - y[3]) * a.alpha3
                m.eq(vid("PD", ld.id, t), mult * self.prof(ld.profile, t), f"clpu/pd/{ld.id}/{t}")
                bus_on = vid("yB", ld.bus, t)
                if ld.switchable:
                    m.le(vid("yNL", ld.id, t), bus_on, f"clpu/bus/{ld.id}/{t}")
                    if t > 1:
                        m.ge(vid("yNL", ld.id, t), vid("yNL", ld.id, t - 1), f"clpu/mono/{ld.id}/{t}")
                else:
                    m.eq(vid("yD", ld.id, t), bus_on, f"clpu/hardwired/{ld.id}/{t}")

    def switch_families(self):
        m, fd, cfg = self.m, self.fd, self.cfg
        adj = fd.adjacency
        for sw in fd.switches:
            i, j = sw.from_bus, sw.to_bus
            for t in range(1, self.T + 1):
                y, y0 = vid("yL", sw.id, t), vid("yL", sw.id, t - 1)
                live = LinExpr({vid("yB", i, t - 1): 1.0, vid("yB", j, t - 1): 1.0})
                dy = LinExpr({y: 1.0, y0: -1.0})
                fam = "esw" if sw.switch == "ESW" else "ssw"
                m.le(y, live, f"{fam}/live/{sw.id}/{t}")
                m.ge(dy, 0.0, f"{fam}/mono/{sw.id}/{t}")
                if fam == "esw":
                    m.le(dy, 2.0 - live, f"esw/dead_side/{sw.id}/{t}")
                else:
                    z = vid("z", sw.id, t)
                    # z = dy * (live - y) with live - y in {0, 1} whenever dy = 1
                    m.le(z, dy, f"ssw/z_dy/{sw.id}/{t}")
                    m.le(z, live - LinExpr.of(y), f"ssw/z_live/{sw.id}/{t}")
                    m.ge(z, dy * 2.0 + live - LinExpr.of(y) - 2.0, f"ssw/z_lo/{sw.id}/{t}")
                    for n in sw.phases:
                        for kind, eps in (("P", cfg.eps_p), ("Q", cfg.eps_q)):
                            flow = vid(kind, sw.id, n, t)
                            relax = LinExpr({z: -self.M}, self.M + eps)
                            m.le(flow, relax, f"ssw/sync_{kind}_hi/{sw.id}/{n}/{t}")
                            m.ge(flow, -relax, f"ssw/sync_{kind}_lo/{sw.id}/{n}/{t}")
                a, b = adj[sw.id]
                diff = LinExpr({vid("f", a, t): 1.0, vid("f", b, t): -1.0})
                relax = LinExpr({y: -cfg.big_m_f}, cfg.big_m_f + cfg.eps_f)
                m.le(diff, relax, f"freq_match/hi/{sw.id}/{t}")
                m.ge(diff, -relax, f"freq_match/lo/{sw.id}/{t}")

    def block_family(self):
        m, fd, T = self.m, self.fd, self.T
        for blk in fd.blocks:
            for t in range(T + 1):
                st = self.blk(blk.id, t)
                for b in blk.buses:
                    m.eq(self.yb(b, t), st, f"block/bus/{b}/{t}")
                for ln in blk.internal_lines:
                    m.eq(vid("yLn", ln, t), st, f"block/line/{ln}/{t}")
                if t == 0:
                    continue
                for sw in blk.boundary_switches:
                    m.ge(st, vid("yL", sw, t), f"block/closed/{blk.id}/{sw}/{t}")
                m.le(vid("f", blk.id, t), st * self.cfg.big_m_f, f"block/f_off/{blk.id}/{t}")
                if blk.id in self.src:
                    g = self.src[blk.id]
                    m.eq(vid("fg", g, t), vid("f", blk.id, t), f"block/f_gfmi/{blk.id}/{t}")
                if blk.id not in self.var_blocks:
                    continue
                m.ge(st, self.blk(blk.id, t - 1), f"block/mono/{blk.id}/{t}")
                w = blk.boundary_switches
                m.le(st, lin_sum(vid("yL", s, t) for s in w), f"block/feed/{blk.id}/{t}")
                new = lin_sum(vid("yL", s, t) for s in w) - lin_sum(vid("yL", s, t - 1) for s in w)
                m.le(new, self.blk(blk.id, t - 1) * len(w) + 1.0, f"block/one_new/{blk.id}/{t}")

    def flow_families(self):
        m, fd, cfg = self.m, self.fd, self.cfg
        mv = cfg.big_m_v
        for t in range(1, self.T + 1):
            for ln in fd.lines:
                y = self.status(ln.id, t)
                for n in ln.phases:
                    for kind in ("P", "Q"):
                        f = vid(kind, ln.id, n, t)
                        m.le(f, LinExpr({y: self.M}), f"branch_flow/{kind}_hi/{ln.id}/{n}/{t}")
                        m.ge(f, LinExpr({y: -self.M}), f"branch_flow/{kind}_lo/{ln.id}/{n}/{t}")
                if ln.is_switch:
                    rb = xb = None
                else:
                    rb, xb = self.coef[ln.id]
                for a, n in enumerate(ln.phases):
                    drop = LinExpr({vid("v", ln.from_bus, n, t): 1.0})
                    if rb is not None:
                        for c, nn in enumerate(ln.phases):
                            drop.add(vid("P", ln.id, nn, t), -2.0 * rb[a, c])
                            drop.add(vid("Q", ln.id, nn, t), -2.0 * xb[a, c])
                    gap = LinExpr({vid("v", ln.to_bus, n, t): 1.0}) - drop
                    relax = LinExpr({y: -mv}, mv)
                    if ln.switch == "SSW":
                        relax.add(vid("z", ln.id, t), cfg.eps_v)
                    m.le(gap, relax, f"branch_flow/v_hi/{ln.id}/{n}/{t}")
                    m.ge(gap, -relax, f"branch_flow/v_lo/{ln.id}/{n}/{t}")
            for b in fd.buses:
                for n in b.phases:
                    v = vid("v", b.id, n, t)
                    m.le(v, LinExpr({self.yb(b.id, t): cfg.v_max_sq}), f"branch_flow/vbox_hi/{b.id}/{n}/{t}")
                    m.ge(v, LinExpr({self.yb(b.id, t): cfg.v_min_sq}), f"branch_flow/vbox_lo/{b.id}/{n}/{t}")

    def balance_family(self):
        m, fd = self.m, self.fd
        loads_at: dict[tuple[str, str], list] = {}
        for ld in fd.loads:
            loads_at.setdefault((ld.bus, ld.phase), []).append(ld)
        pvs_at: dict[str, list] = {}
        for pv in fd.pvs:
            pvs_at.setdefault(pv.bus, []).append(pv)
        for t in range(1, self.T + 1):
            for b in fd.buses:
                for n in b.phases:
                    ep, eq = LinExpr(), LinExpr()
                    for ln in fd.lines:
                        if n not in ln.phases:
                            continue
                        if ln.to_bus == b.id:
                            ep.add(vid("P", ln.id, n, t))
                            eq.add(vid("Q", ln.id, n, t))
                        elif ln.from_bus == b.id:
                            ep.add(vid("P", ln.id, n, t), -1.0)
                            eq.add(vid("Q", ln.id, n, t), -1.0)
                    if b.id in fd.gfmis:
                        ep.add(vid("p", b.id, n, t))
                        eq.add(vid("q", b.id, n, t))
                    for pv in pvs_at.get(b.id, []):
                        if n in pv.phases:
                            share = 1.0 / len(pv.phases)
                            ep.add(vid("ppv", pv.id, t), share)
                            eq.add(vid("qpv", pv.id, t), share)
                    if fd.tg and b.id == fd.tg.bus:
                        ep.add(vid("ptg", n, t))
                        eq.add(vid("qtg", n, t))
                    for ld in loads_at.get((b.id, n), []):
                        ep.add(vid("PD", ld.id, t), -1.0)
                        eq.add(vid("PD", ld.id, t), -math.tan(ld.pf_angle))
                    m.eq(ep, 0.0, f"nodal_balance/P/{b.id}/{n}/{t}")
                    m.eq(eq, 0.0, f"nodal_balance/Q/{b.id}/{n}/{t}")

    def tg_family(self):
        m, fd = self.m, self.fd
        if fd.tg is None:
            return
        tb = fd.tg.bus
        phases = fd.bus_map[tb].phases
        for t in range(1, self.T + 1):
            y = float(self.ytg[t])
            for n in phases:
                for kind in ("ptg", "qtg"):
                    m.le(vid(kind, n, t), self.M * y, f"tg/{kind}_hi/{n}/{t}")
                    m.ge(vid(kind, n, t), -self.M * y, f"tg/{kind}_lo/{n}/{t}")
                m.eq(vid("v", tb, n, t), 1.0 * y, f"tg/v/{n}/{t}")
            m.eq(vid("ptg_tot", t), lin_sum(vid("ptg", n, t) for n in phases), f"tg/ptot/{t}")
            m.eq(vid("qtg_tot", t), lin_sum(vid("qtg", n, t) for n in phases), f"tg/qtot/{t}")
            quad_capability(m, vid("ptg_tot", t), vid("qtg_tot", t), fd.tg.ss_rat, self.cfg.quad_mode, f"tg/ss/{t}")
            m.eq(vid("f", self.tg_blk, t), 60.0 * y, f"tg/f/{t}")
            for sw in self.fd.block_map[self.tg_blk].boundary_switches:
                m.le(vid("yL", sw, t), float(self.ytg[t - 1]), f"tg/adjacent/{sw}/{t}")

    def radiality_family(self):
        m, fd = self.m, self.fd
        tg_buses = set(fd.block_map[self.tg_blk].buses) if self.tg_blk else set()
        for t in range(self.T + 1):
            lines = lin_sum(self.status(ln.id, t) for ln in fd.lines)
            buses = lin_sum(self.yb(b.id, t) for b in fd.buses if b.id not in tg_buses)
            buses.add(LinExpr(const=float(self.ytg[t] * len(tg_buses))))
            m.eq(lines, buses - LinExpr.of(vid("R", t)), f"radiality/count/{t}")
            roots = lin_sum(vid("yES", g, t) for g in self.gfmis) + float(self.ytg[t] if fd.tg else 0)
            m.eq(vid("R", t), roots, f"radiality/roots/{t}")
            if t > 0:
                for g in self.gfmis:
                    m.le(vid("yES", g, t), vid("yES", g, t - 1), f"radiality/es_mono/{g}/{t}")
        for k, (cyc, limit) in enumerate(switch_cycles(fd)):
            for t in range(1, self.T + 1):
                m.le(lin_sum(vid("yL", s, t) for s in cyc), float(limit), f"radiality/loop{k}/{t}")
        if self.cfg.sync_mode == "rule_based":
            sched = rule_based_schedule(fd, self.cfg)
            self.index.demotion = sched
            order = sorted(self.gfmis, key=lambda g: sched[g] if sched[g] is not None else self.T + 1)
            for g in self.gfmis:
                r = sched[g]
                # no hand-over before the slot; afterwards when the network allows
                for t in range(1, self.T + 1):
                    if r is None or t < r:
                        m.eq(vid("yES", g, t), 1.0, f"radiality/rule/{g}/{t}")
            for t in range(1, self.T + 1):
                for a, b in zip(order, order[1:]):
                    m.le(vid("yES", a, t), vid("yES", b, t), f"radiality/rule_order/{a}/{b}/{t}")
                m.le(lin_sum(vid("delta", g, t) for g in self.gfmis), 1.0, f"radiality/rule_one/{t}")

    def root_family(self):
        for g in self.gfmis:
            for tau in range(1, self.T + 1):
                total = lin_sum(vid("delta", g, t) for t in range(1, tau + 1))
                self.m.eq(vid("yES", g, tau), 1.0 - total, f"root_coord/{g}/{tau}")

    def init_family(self):
        m = self.m
        for g in self.gfmis:
            m.eq(vid("yES", g, 0), 1.0, f"init/yES/{g}")
            m.eq(vid("soc", g, 0), 1.0, f"init/soc/{g}")
            m.eq(vid("fg", g, 0), self.fd.gfmis[g].f_star, f"init/f/{g}")
            for n in self.fd.bus_map[g].phases:
                m.eq(vid("p", g, n, 0), 0.0, f"init/p/{g}/{n}")
        for blk in self.var_blocks:
            m.eq(vid("yBB", blk, 0), 0.0, f"init/yBB/{blk}")
        for sw in self.fd.switches:
            m.eq(vid("yL", sw.id, 0), 0.0, f"init/yL/{sw.id}")

    def objective(self):
        obj = LinExpr()
        for ld in self.fd.loads:
            for t in range(1, self.T + 1):
                obj.add(vid("PD", ld.id, t), self.dt_h)
        self.m.maximize(obj)

    def build(self) -> ModelIR:
        if not self.fd.gfmis:
            raise FeederError("feeder has no GFMI; nothing can self-start")
        self.declare()
        self.init_family()
        self.gfmi_families()
        self.pv_family()
        self.clpu_family()
        self.switch_families()
        self.block_family()
        self.flow_families()
        self.balance_family()
        self.tg_family()
        self.radiality_family()
        self.root_family()
        self.objective()
        self.m.validate()
        return self.m


def switch_cycles(feeder: FeederModel) -> list[tuple[list[str], int]]:
    """(switches, limit) pairs: closing more than ``limit`` of them closes a loop."""
    g = block_graph(feeder)
    out: list[tuple[list[str], int]] = []
    simple = nx.Graph()
    groups: dict[frozenset, list[str]] = {}
    for a, b, key in g.edges(keys=True):
        groups.setdefault(frozenset((a, b)), []).append(key)
        simple.add_edge(a, b)
    for grp in groups.values():
        if len(grp) > 1:
            out.append((sorted(grp, key=natural_key), 1))
    for cyc in nx.simple_cycles(simple):
        if len(cyc) < 3:
            continue
        edges = [frozenset((cyc[k], cyc[(k + 1) % len(cyc)])) for k in range(len(cyc))]
        # parallel groups are capped at one closure, so this is "not every edge closed"
        members = sorted((s for e in edges for s in groups[e]), key=natural_key)
        out.append((members, len(edges) - 1))
    return out


def build_model(feeder: FeederModel, config: PlanningConfig | None = None) -> tuple[ModelIR, ModelIndex]:
    """The restoration model and the index needed to read its solution."""
    b = _Builder(feeder, config or PlanningConfig())
    return b.build(), b.index
