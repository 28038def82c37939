"""Independent replay of a restoration plan against its feeder.

Nothing here looks at the optimization model.  Statuses, demands, PV
output, state of charge and frequencies are rebuilt from the feeder data
and the plan's own decisions, then compared with what the plan claims.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import networkx as nx

from .clpu import ClpuCoefficients, demand_multiplier
from .der import (
    PV_Q_RATIO,
    GfmiParams,
    critical_lag,
    frequency_response,
    lag_for_gamma,
    nadir_estimate,
    pv_output,
    qss_frequency,
    rocof_estimate,
    simulate_vsg_step,
    soc_step,
)
from .feeder import PHASES, FeederModel
from .planner.config import PlanningConfig
from .planner.plan import RestorationPlan, StepRecord

TOL_KW = 1e-3
TOL_SOC = 1e-6
TOL_F = 1e-5
TOL_REL = 1e-6
SEVERITIES = ("pass", "warn", "fail")


@dataclass
class Finding:
    severity: str
    check: str
    step: int
    element: str
    message: str
    slack: float | None = None  # margin to the limit; negative when violated

    def line(self) -> str:
        s = "" if self.slack is None else f" [slack {self.slack:+.6g}]"
        return f"{self.severity.upper():4s} t={self.step:<3d} {self.check:<14s} {self.element:<12s} {self.message}{s}"


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "fail" if any(f.severity == "fail" for f in self.findings) else "pass"

    @property
    def ok(self) -> bool:
        return self.verdict == "pass"

    def failures(self, check: str | None = None) -> list[Finding]:
        return [f for f in self.findings if f.severity == "fail" and (check is None or f.check == check)]

    def extend(self, more) -> "ValidationReport":
        self.findings.extend(more)
        return self

    def sorted(self) -> "ValidationReport":
        rank = {s: k for k, s in enumerate(SEVERITIES)}
        self.findings.sort(key=lambda f: (f.step, f.check, f.element, rank[f.severity]))
        return self

    def to_dict(self) -> dict:
        steps: dict[int, list] = {}
        for f in self.findings:
            steps.setdefault(f.step, []).append(asdict(f))
        return {"verdict": self.verdict, "n_fail": len(self.failures()),
                "steps": [{"t": t, "findings": fs} for t, fs in sorted(steps.items())]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def to_text(self) -> str:
        lines = [f.line() for f in self.findings]
        lines.append(f"verdict: {self.verdict} ({len(self.failures())} failing findings)")
        return "\n".join(lines) + "\n"


class _Sink:
    """Collects failures and one pass line per (step, check) with the tightest slack."""

    def __init__(self, check: str):
        self.check = check
        self.out: list[Finding] = []
        self.seen: dict[int, float | None] = {}
        self.failed: set[int] = set()

    def fail(self, t, element, message, slack=None):
        self.failed.add(t)
        self.out.append(Finding("fail", self.check, t, str(element), message, slack))

    def warn(self, t, element, message, slack=None):
        self.out.append(Finding("warn", self.check, t, str(element), message, slack))

    def ok(self, t, slack=None):
        cur = self.seen.get(t, None)
        if t not in self.seen or (slack is not None and (cur is None or slack < cur)):
            self.seen[t] = slack

    def bound(self, t, element, what, value, lo, hi, tol):
        """Check ``lo <= value <= hi`` and record the tighter side's slack."""
        slack = min(value - lo, hi - value)
        if slack < -tol:
            side = "below" if value - lo < hi - value else "above"
            self.fail(t, element, f"{what} {value:.6g} {side} [{lo:.6g}, {hi:.6g}]", slack)
        else:
            self.ok(t, slack)

    def findings(self) -> list[Finding]:
        passes = [Finding("pass", self.check, t, "*", "ok", s) for t, s in sorted(self.seen.items())
                  if t not in self.failed]
        return self.out + passes


def _config(plan: RestorationPlan, config: PlanningConfig | None) -> PlanningConfig:
    if config is not None:
        return config
    return PlanningConfig.from_dict(plan.settings) if plan.settings else PlanningConfig()


def _start(plan: RestorationPlan) -> int:
    return int(plan.settings.get("start_step", 0) or 0)


def _clpu(feeder: FeederModel, plan: RestorationPlan) -> ClpuCoefficients:
    c = plan.settings.get("clpu")
    return ClpuCoefficients(**c) if c else feeder.clpu


def _buses_on(feeder: FeederModel, step: StepRecord) -> set[str]:
    return {b for blk in step.blocks_on for b in feeder.block_map[blk].buses}


# --------------------------------------------------------------------- switching


def closure_state(kind_live: int, was_closed: bool) -> int:
    """Table-I state of a switch from its endpoints' previous status.

    1: both sides dead, 2/3: exactly one side live, 4: both live,
    5: already closed.
    """
    if was_closed:
        return 5
    return {0: 1, 1: 2, 2: 4}[kind_live]


def check_switch_legality(feeder: FeederModel, plan: RestorationPlan, config: PlanningConfig | None = None) -> list[Finding]:
    cfg = _config(plan, config)
    leg, ene, syn = _Sink("legality"), _Sink("energization"), _Sink("sync_flow")
    kinds = {sw.id: sw.switch for sw in feeder.switches}
    fixed = set(feeder.source_blocks.values())
    for t in range(1, len(plan.steps)):
        prev, cur = plan.steps[t - 1], plan.steps[t]
        prev_on, cur_on = set(prev.blocks_on), set(cur.blocks_on)
        was, now = set(prev.closed_switches), set(cur.closed_switches)
        unknown = (now | {c.switch for c in cur.closures}) - set(kinds)
        for sw in sorted(unknown):
            leg.fail(t, sw, "not a switch of this feeder")
        recorded = {c.switch: c for c in cur.closures if c.switch in kinds}
        for sw, kind in kinds.items():
            a, b = feeder.adjacency[sw]
            live = int(a in prev_on) + int(b in prev_on)
            if sw in was and sw not in now:
                leg.fail(t, sw, "opened after closing (state 5 keeps it closed)")
                continue
            if sw not in now:
                if sw in recorded:
                    leg.fail(t, sw, "closure recorded for a switch that is open")
                continue
            if sw in was:
                if sw in recorded:
                    leg.fail(t, sw, "closure recorded for a switch already closed")
                leg.ok(t)
                continue
            state = closure_state(live, False)
            if state == 1:
                leg.fail(t, sw, f"{kind} closed between two dead buses (state 1)")
            elif state == 4 and kind == "ESW":
                leg.fail(t, sw, "ESW closed between two live buses (state 4)")
            else:
                leg.ok(t)
            sync = kind == "SSW" and state == 4
            c = recorded.get(sw)
            if c is None:
                leg.fail(t, sw, "closure missing from the step record")
            elif c.kind != kind or bool(c.sync) != sync:
                leg.fail(t, sw, f"closure recorded as {c.kind}/sync={c.sync}, replay gives {kind}/sync={sync}")
            if sync:
                flows = cur.line_flows.get(sw, {"p": [0.0] * 3, "q": [0.0] * 3})
                for key, eps in (("p", cfg.eps_p), ("q", cfg.eps_q)):
                    worst = max(abs(x) for x in flows[key])
                    if worst > eps + TOL_KW:
                        syn.fail(t, sw, f"|{key.upper()}|={worst:.6g} across the SSW at its sync instant", eps - worst)
                    else:
                        syn.ok(t, eps - worst)
        # block feeding
        for blk in feeder.blocks:
            if blk.id in prev_on and blk.id not in cur_on:
                ene.fail(t, blk.id, "block de-energized")
            if blk.id in fixed or blk.id == feeder.tg_block or blk.id not in cur_on:
                continue
            if not any(s in now for s in blk.boundary_switches):
                ene.fail(t, blk.id, "energized with every boundary switch open")
            if blk.id not in prev_on:
                fresh = [s for s in blk.boundary_switches if s in now and s not in was]
                if len(fresh) > 1:
                    ene.fail(t, blk.id, f"energized through {len(fresh)} switches at once ({', '.join(fresh)})")
                else:
                    ene.ok(t)
        for sw in now & set(kinds):
            a, b = feeder.adjacency[sw]
            if a not in cur_on or b not in cur_on:
                ene.fail(t, sw, "closed switch with a dead side")
        if feeder.tg_block and (feeder.tg_block in cur_on) != bool(cur.tg_on):
            ene.fail(t, feeder.tg_block, "TG block status disagrees with tg_on")
        for blk in fixed:
            if blk not in cur_on:
                ene.fail(t, blk, "GFMI block must stay energized")
    return leg.findings() + ene.findings() + syn.findings()


# --------------------------------------------------------------------- radiality


def energized_graph(feeder: FeederModel, step: StepRecord) -> nx.MultiGraph:
    on = _buses_on(feeder, step)
    blocks = set(step.blocks_on)
    closed = set(step.closed_switches)
    g = nx.MultiGraph()
    g.add_nodes_from(sorted(on))
    for ln in feeder.lines:
        if ln.is_switch:
            live = ln.id in closed
        else:
            live = feeder.block_of_bus[ln.from_bus] in blocks
        if live:
            g.add_edge(ln.from_bus, ln.to_bus, key=ln.id)
    return g


def check_radiality(feeder: FeederModel, plan: RestorationPlan) -> list[Finding]:
    rad, mono = _Sink("radiality"), _Sink("root_mono")
    prev_root: dict[str, bool] = {}
    for step in plan.steps:
        t = step.t
        g = energized_graph(feeder, step)
        on = set(g.nodes)
        for a, b, key in g.edges(keys=True):
            if a not in on or b not in on:
                rad.fail(t, key, "closed line touches a dead bus")
        g.remove_nodes_from([n for n in list(g.nodes) if n not in on])
        roots = {gs.bus for gs in step.gfmi if gs.is_root}
        tg_root = feeder.tg.bus if feeder.tg and step.tg_on else None
        for gs in step.gfmi:
            if gs.is_root and gs.bus not in on:
                rad.fail(t, gs.bus, "root GFMI bus is not energized")
        ok = True
        for comp in nx.connected_components(g):
            sub = g.subgraph(comp)
            name = min(comp)
            if sub.number_of_edges() != len(comp) - 1:
                rad.fail(t, name, f"island around bus {name} contains a loop")
                ok = False
            n_roots = len(roots & comp) + int(tg_root in comp)
            if n_roots != 1:
                rad.fail(t, name, f"island around bus {name} has {n_roots} roots")
                ok = False
        r_t = len(roots) + int(bool(step.tg_on))
        lhs, rhs = g.number_of_edges(), len(on) - r_t
        if lhs != rhs:
            rad.fail(t, "count", f"closed lines {lhs} != energized buses {len(on)} - roots {r_t}")
        elif ok:
            rad.ok(t, 0.0)
        for gs in step.gfmi:
            if gs.is_root and prev_root.get(gs.bus) is False:
                mono.fail(t, gs.bus, "GFMI became a root again")
            prev_root[gs.bus] = gs.is_root
        mono.ok(t)
    return rad.findings() + mono.findings()


# --------------------------------------------------------------------- frequency


def check_frequency_security(feeder: FeederModel, plan: RestorationPlan, config: PlanningConfig | None = None) -> list[Finding]:
    cfg = _config(plan, config)
    qss, rocof, nadir = _Sink("freq_qss"), _Sink("rocof"), _Sink("nadir")
    match, unif, shift = _Sink("freq_match"), _Sink("freq_uniform"), _Sink("sync_shift")
    src = feeder.source_blocks
    for t in range(1, len(plan.steps)):
        prev, cur = plan.steps[t - 1], plan.steps[t]
        n_delta = sum(gs.delta for gs in cur.gfmi)
        for gs in cur.gfmi:
            prm: GfmiParams = feeder.gfmis[gs.bus]
            p_prev = prev.gfmi_at(gs.bus)
            dp = gs.p_total - p_prev.p_total
            limit = n_delta * cfg.delta_f_star_max
            if abs(gs.f_shift_hz) > limit + TOL_F:
                shift.fail(t, gs.bus, f"synchronizing offset {gs.f_shift_hz:.6g} Hz with {n_delta} handovers", limit - abs(gs.f_shift_hz))
            else:
                shift.ok(t, limit - abs(gs.f_shift_hz))
            try:
                f_q = qss_frequency(prm, gs.p_total) + gs.f_shift_hz
                r = rocof_estimate(prm, dp)
                f_n = nadir_estimate(prm, p_prev.f_hz, dp)
            except ValueError as exc:
                qss.fail(t, gs.bus, str(exc))
                continue
            if abs(f_q - gs.f_hz) > TOL_F * 10:
                qss.fail(t, gs.bus, f"plan frequency {gs.f_hz:.6g} Hz, droop replay {f_q:.6g} Hz", -abs(f_q - gs.f_hz))
            qss.bound(t, gs.bus, "QSS frequency", f_q, cfg.qss_lo, cfg.qss_hi, TOL_F)
            rocof.bound(t, gs.bus, "RoCoF", r, cfg.rocof_min, cfg.rocof_max, TOL_F)
            nadir.bound(t, gs.bus, "nadir" if dp >= 0 else "zenith", f_n, cfg.nadir_min, cfg.nadir_max, TOL_F)
            fb = cur.block_f_hz.get(src[gs.bus])
            if fb is None or abs(fb - gs.f_hz) > TOL_F * 10:
                unif.fail(t, gs.bus, f"GFMI at {gs.f_hz:.6g} Hz, its block at {fb} Hz")
            else:
                unif.ok(t)
        for blk in cur.blocks_on:
            if blk not in cur.block_f_hz:
                unif.fail(t, blk, "energized block without a frequency")
        if feeder.tg_block and cur.tg_on:
            f_tg = cur.block_f_hz.get(feeder.tg_block, math.nan)
            if not abs(f_tg - 60.0) <= TOL_F * 10:
                unif.fail(t, feeder.tg_block, f"TG block at {f_tg} Hz")
        for sw in cur.closed_switches:
            if sw not in feeder.adjacency:
                continue
            a, b = feeder.adjacency[sw]
            fa, fb = cur.block_f_hz.get(a), cur.block_f_hz.get(b)
            if fa is None or fb is None:
                match.fail(t, sw, "closed switch next to a block without frequency")
                continue
            gap = abs(fa - fb)
            if gap > cfg.eps_f + TOL_F:
                match.fail(t, sw, f"sides at {fa:.6g} and {fb:.6g} Hz", cfg.eps_f - gap)
            else:
                match.ok(t, cfg.eps_f - gap)
    out = []
    for s in (qss, rocof, nadir, match, unif, shift):
        out += s.findings()
    return out


# ------------------------------------------------------------------ energy/power


def check_energy_and_balance(feeder: FeederModel, plan: RestorationPlan, config: PlanningConfig | None = None) -> list[Finding]:
    cfg = _config(plan, config)
    coeffs = _clpu(feeder, plan)
    start = _start(plan)
    dt_h = plan.dt_minutes / 60.0
    lds, dmd, pvk = _Sink("load_status"), _Sink("clpu_demand"), _Sink("pv")
    bal, soc, thermal = _Sink("balance"), _Sink("soc"), _Sink("thermal")
    tg, volt = _Sink("tg"), _Sink("voltage")
    history = {ld.id: [0] for ld in feeder.loads}
    load_at: dict[tuple[str, str], list] = {}
    for ld in feeder.loads:
        load_at.setdefault((ld.bus, ld.phase), []).append(ld)
    for gs in plan.steps[0].gfmi:
        if abs(gs.soc - 1.0) > TOL_SOC:
            soc.fail(0, gs.bus, f"initial SoC {gs.soc:.6g}, expected 1")
    for t in range(1, len(plan.steps)):
        prev, cur = plan.steps[t - 1], plan.steps[t]
        on = _buses_on(feeder, cur)
        on_prev = _buses_on(feeder, prev)
        served = set(cur.loads_on)
        k = start + t - 1
        # load statuses and CLPU demand
        for ld in feeder.loads:
            y = int(ld.id in served)
            if ld.switchable:
                if y and ld.bus not in on:
                    lds.fail(t, ld.id, "switchable load served on a dead bus")
                if history[ld.id][-1] and not y:
                    lds.fail(t, ld.id, "switchable load dropped after pickup")
            elif y != int(ld.bus in on):
                lds.fail(t, ld.id, "hard-wired load status differs from its bus status")
            history[ld.id].append(y)
            want = float(ld.profile[k]) * demand_multiplier(history[ld.id], coeffs, t)
            got = cur.load_kw.get(ld.id, 0.0)
            if abs(got - want) > TOL_KW:
                dmd.fail(t, ld.id, f"demand {got:.6g} kW, CLPU replay {want:.6g} kW", -abs(got - want))
            else:
                dmd.ok(t)
        lds.ok(t)
        # PV with the one-step delay
        for pv in feeder.pvs:
            want = pv_output(pv.profile[k], pv.bus in on_prev)
            got = cur.pv_p_kw.get(pv.id, 0.0)
            if abs(got - want) > TOL_KW:
                pvk.fail(t, pv.id, f"output {got:.6g} kW, forecast replay {want:.6g} kW", -abs(got - want))
            qcap = PV_Q_RATIO * pv.rated_kw * (pv.bus in on_prev)
            pvk.bound(t, pv.id, "reactive output", cur.pv_q_kvar.get(pv.id, 0.0), -qcap, qcap, TOL_KW)
        # nodal balance per phase
        inj_p: dict[tuple[str, str], float] = {}
        inj_q: dict[tuple[str, str], float] = {}

        def add(store, bus, n, x):
            store[(bus, n)] = store.get((bus, n), 0.0) + x

        for gs in cur.gfmi:
            for c, n in enumerate(PHASES):
                add(inj_p, gs.bus, n, gs.p_kw[c])
                add(inj_q, gs.bus, n, gs.q_kvar[c])
        for pv in feeder.pvs:
            for n in pv.phases:
                add(inj_p, pv.bus, n, cur.pv_p_kw.get(pv.id, 0.0) / len(pv.phases))
                add(inj_q, pv.bus, n, cur.pv_q_kvar.get(pv.id, 0.0) / len(pv.phases))
        if feeder.tg:
            for c, n in enumerate(PHASES):
                add(inj_p, feeder.tg.bus, n, cur.tg_p_kw[c])
                add(inj_q, feeder.tg.bus, n, cur.tg_q_kvar[c])
        for ld in feeder.loads:
            pd = cur.load_kw.get(ld.id, 0.0)
            add(inj_p, ld.bus, ld.phase, -pd)
            add(inj_q, ld.bus, ld.phase, -pd * math.tan(ld.pf_angle))
        for ln in feeder.lines:
            fl = cur.line_flows.get(ln.id)
            if fl is None:
                continue
            for c, n in enumerate(PHASES):
                add(inj_p, ln.from_bus, n, -fl["p"][c])
                add(inj_p, ln.to_bus, n, fl["p"][c])
                add(inj_q, ln.from_bus, n, -fl["q"][c])
                add(inj_q, ln.to_bus, n, fl["q"][c])
        worst = 0.0
        for store, what in ((inj_p, "P"), (inj_q, "Q")):
            for (bus, n), r in sorted(store.items()):
                if abs(r) > TOL_KW:
                    bal.fail(t, f"{bus}.{n}", f"{what} residual {r:.6g}", -abs(r))
                worst = max(worst, abs(r))
        bal.ok(t, TOL_KW - worst)
        # SoC replay and ratings
        for gs in cur.gfmi:
            prm = feeder.gfmis[gs.bus]
            p0 = prev.gfmi_at(gs.bus)
            try:
                want, _ = soc_step(prm, min(max(p0.soc, 0.0), 1.0), gs.p_total, dt_h)
            except ValueError as exc:
                soc.fail(t, gs.bus, str(exc))
                continue
            if abs(want - gs.soc) > TOL_SOC:
                soc.fail(t, gs.bus, f"SoC {gs.soc:.8g}, replay {want:.8g}", -abs(want - gs.soc))
            soc.bound(t, gs.bus, "SoC", gs.soc, cfg.soc_min, 1.0, TOL_SOC)
            cap = prm.s_rat / 3.0
            for c, n in enumerate(PHASES):
                s = math.hypot(gs.p_kw[c], gs.q_kvar[c])
                thermal.bound(t, f"{gs.bus}.{n}", "phase apparent power", s, 0.0, cap, TOL_REL * cap)
        if feeder.tg:
            s = math.hypot(sum(cur.tg_p_kw), sum(cur.tg_q_kvar))
            cap = feeder.tg.ss_rat if cur.tg_on else 0.0
            tg.bound(t, feeder.tg.bus, "TG apparent power", s, 0.0, cap, TOL_KW)
        for bus, vs in cur.v_sq.items():
            b = feeder.bus_map.get(bus)
            if b is None:
                volt.fail(t, bus, "unknown bus")
                continue
            for c, n in enumerate(PHASES):
                if n in b.phases:
                    volt.bound(t, f"{bus}.{n}", "squared voltage", vs[c], cfg.v_min_sq, cfg.v_max_sq, TOL_REL)
    out = []
    for s in (lds, dmd, pvk, bal, soc, thermal, tg, volt):
        out += s.findings()
    return out


# ------------------------------------------------------------------------ driver


def validate_plan(feeder: FeederModel, plan: RestorationPlan, config: PlanningConfig | None = None) -> ValidationReport:
    rep = ValidationReport()
    rep.extend(check_switch_legality(feeder, plan, config))
    rep.extend(check_radiality(feeder, plan))
    rep.extend(check_frequency_security(feeder, plan, config))
    rep.extend(check_energy_and_balance(feeder, plan, config))
    return rep.sorted()


# -------------------------------------------------------------- frequency check


@dataclass
class FrequencyCheckRow:
    pickup_kw: float
    measured_rocof: float
    estimated_rocof: float
    accuracy_rocof: float
    measured_nadir: float
    estimated_nadir: float
    accuracy_nadir: float
    measured_qss: float
    estimated_qss: float
    accuracy_qss: float

    @property
    def worst(self) -> float:
        return min(self.accuracy_rocof, self.accuracy_nadir, self.accuracy_qss)


def accuracy_pct(measured: float, estimated: float, reference: float = 0.0) -> float:
    """``100 (1 - |estimated - measured| / |measured - reference|)``.

    Frequencies are compared as deviations from the nominal value
    (``reference = f*``); RoCoF directly (``reference = 0``).
    """
    dev = abs(measured - reference)
    if dev == 0.0:
        return 100.0 if estimated == measured else 0.0
    return 100.0 * (1.0 - abs(estimated - measured) / dev)


def verify_frequency_estimates(params: GfmiParams, pickups, duration: float = 30.0, dt_sim: float = 1e-3,
                              keep_trajectories: bool = False):
    """Closed-form estimates against the reduced-order simulation, per pickup (kW)."""
    rows, trajs = [], []
    t_lp = params.t_lp
    if t_lp is None and params.gamma > 0:
        t_lp = lag_for_gamma(params.h, params.d, params.kf, params.gamma)
    elif t_lp is None:
        # any lag on the overdamped branch reproduces gamma = 0
        t_lp = 0.5 * critical_lag(params.h, params.d, params.kf)
    for dp in pickups:
        dp = float(dp)
        est = frequency_response(params, 0.0, dp)
        if dp == 0.0:
            f0 = params.f_star
            rows.append(FrequencyCheckRow(0.0, 0.0, 0.0, 100.0, f0, f0, 100.0, f0, f0, 100.0))
            trajs.append(None)
            continue
        sim = simulate_vsg_step(params, 0.0, dp, duration=duration, dt_sim=dt_sim, t_lp=t_lp)
        fs = params.f_star
        rows.append(FrequencyCheckRow(
            dp,
            sim.rocof, est.rocof, accuracy_pct(sim.rocof, est.rocof),
            sim.f_nadir, est.f_nadir, accuracy_pct(sim.f_nadir, est.f_nadir, fs),
            sim.f_qss, est.f_qss, accuracy_pct(sim.f_qss, est.f_qss, fs),
        ))
        trajs.append(sim if keep_trajectories else None)
    return (rows, trajs) if keep_trajectories else rows
