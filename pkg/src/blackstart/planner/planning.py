"""Solve the restoration model and read the solution back as a plan."""
from __future__ import annotations

import networkx as nx

from ..feeder import PHASES, FeederModel, natural_key
from ..milp import Backend, LinExpr, ModelIR, Solution, elastic_diagnostics, lin_sum, solve
from .build import ModelIndex, build_model, vid
from .config import PlanningConfig
from .plan import Closure, GfmiState, RestorationPlan, StepRecord, metrics

SNAP = 1e-9


class PlanError(RuntimeError):
    """The solver did not return a usable solution."""


class PlanInfeasible(PlanError):
    """No plan satisfies every constraint; ``report`` names the culprits."""

    def __init__(self, message: str, report: dict):
        super().__init__(message)
        self.report = report


def solve_plan(
    feeder: FeederModel,
    config: PlanningConfig | None = None,
    backend: Backend | str = "exhaustive",
    diagnose: bool = True,
    **solve_kw,
) -> RestorationPlan:
    config = config or PlanningConfig()
    model, index = build_model(feeder, config)
    sol = solve(model, backend, **solve_kw)
    if sol.status == "infeasible":
        report = elastic_diagnostics(model, backend) if diagnose else {}
        raise PlanInfeasible(_infeasible_message(sol, report), report)
    if not sol.ok:
        raise PlanError(f"solver returned {sol.status}: {sol.message}")
    served = sol.objective
    if config.tie_break == "reconnect":
        sol = _reconnect_early(model, index, sol, backend, **solve_kw)
    plan = extract_plan(sol, index, model)
    plan.objective = float(served)
    return plan


def _reconnect_early(model: ModelIR, index: ModelIndex, first: Solution, backend, **solve_kw) -> Solution:
    """Second stage: keep the served energy, minimize the root count summed over time.

    Served energy is blind to when islands join the grid once their loads
    are on, so without this the plan may leave a GFMI island running.
    """
    served = dict(model.objective)
    tol = 1e-7 * max(1.0, abs(first.objective))
    model.ge(LinExpr(served), first.objective - tol, "objective/keep_served")
    model.minimize(lin_sum(vid("R", t) for t in range(1, index.steps + 1)))
    try:
        sol = solve(model, backend, **solve_kw)
    finally:
        model.maximize(LinExpr(served))
        model.drop("objective/keep_served")
    return sol if sol.ok else first


def _infeasible_message(sol: Solution, report: dict) -> str:
    fams = report.get("families") or {}
    top = sorted(fams.items(), key=lambda kv: -kv[1])[:5]
    parts = [f"{f} ({s:.3g})" for f, s in top]
    msg = "restoration model is infeasible"
    if parts:
        msg += "; slack needed in " + ", ".join(parts)
    conflict = report.get("conflict") or sol.diagnostics.get("conflict")
    if conflict:
        msg += f"; propagation failed at {conflict}"
    return msg


def _v(sol: Solution, name: str) -> float:
    x = float(sol.values.get(name, 0.0))
    return 0.0 if abs(x) < SNAP else x


def _bit(sol: Solution, name: str) -> int:
    return int(round(sol.values.get(name, 0.0)))


def _per_phase(sol: Solution, kind: str, head: str, phases, t: int) -> list[float]:
    return [_v(sol, vid(kind, head, n, t)) if n in phases else 0.0 for n in PHASES]


def energized_islands(feeder: FeederModel, blocks_on, closed) -> list[set[str]]:
    """Energized blocks grouped by the closed switches joining them."""
    g = nx.Graph()
    g.add_nodes_from(blocks_on)
    for sw in closed:
        a, b = feeder.adjacency[sw]
        if a in g and b in g:
            g.add_edge(a, b)
    return [set(c) for c in nx.connected_components(g)]


def canonical_roots(feeder: FeederModel, blocks_on, closed, tg_on: bool) -> dict[str, bool]:
    """Root flag per GFMI: the TG roots its island, else the smallest GFMI id.

    Islands only grow, so a GFMI that loses the root never regains it.
    """
    src = feeder.source_blocks
    out = {g: False for g in feeder.gfmis}
    for comp in energized_islands(feeder, blocks_on, closed):
        if tg_on and feeder.tg_block in comp:
            continue
        members = sorted((g for g, b in src.items() if b in comp), key=natural_key)
        if members:
            out[members[0]] = True
    return out


def extract_plan(sol: Solution, index: ModelIndex, model: ModelIR | None = None) -> RestorationPlan:
    fd, cfg, T = index.feeder, index.config, index.steps
    gfmis = sorted(fd.gfmis, key=natural_key)
    src = fd.source_blocks
    steps: list[StepRecord] = []
    prev_closed: set[str] = set()
    prev_root = {g: True for g in gfmis}
    for t in range(T + 1):
        tg_on = bool(index.tg_status[t])
        closed = [sw.id for sw in fd.switches if t > 0 and _bit(sol, vid("yL", sw.id, t))]
        blocks_on = []
        for blk in fd.blocks:
            if blk.id in src.values():
                on = True
            elif blk.id == fd.tg_block:
                on = tg_on
            else:
                on = t > 0 and bool(_bit(sol, vid("yBB", blk.id, t)))
            if on:
                blocks_on.append(blk.id)
        closures = []
        for sw in fd.switches:
            if sw.id in closed and sw.id not in prev_closed:
                sync = sw.switch == "SSW" and bool(_bit(sol, vid("z", sw.id, t)))
                closures.append(Closure(sw.id, sw.switch, sync))
        roots = canonical_roots(fd, blocks_on, closed, tg_on)
        rec = StepRecord(t=t, closures=closures, closed_switches=closed, blocks_on=blocks_on, tg_on=tg_on)
        for ld in fd.loads:
            on = t > 0 and bool(_bit(sol, vid("yNL" if ld.switchable else "yD", ld.id, t)))
            if on:
                rec.loads_on.append(ld.id)
                rec.diversified_kw += float(ld.profile[index.profile_index(t)])
            rec.load_kw[ld.id] = _v(sol, vid("PD", ld.id, t)) if t > 0 else 0.0
        for g in gfmis:
            prm = fd.gfmis[g]
            phases = fd.bus_map[g].phases
            shift = sum(_v(sol, vid("w", b, g, t)) for b in gfmis) if t > 0 else 0.0
            rec.gfmi.append(GfmiState(
                bus=g,
                p_kw=_per_phase(sol, "p", g, phases, t),
                q_kvar=_per_phase(sol, "q", g, phases, t) if t > 0 else [0.0, 0.0, 0.0],
                soc=_v(sol, vid("soc", g, t)),
                f_hz=_v(sol, vid("fg", g, t)) if t > 0 else prm.f_star,
                is_root=roots[g],
                delta=prev_root[g] and not roots[g],
                f_shift_hz=shift,
            ))
        for blk in blocks_on:
            if t > 0:
                rec.block_f_hz[blk] = _v(sol, vid("f", blk, t))
            elif blk in src.values():
                rec.block_f_hz[blk] = fd.gfmis[next(g for g, b in src.items() if b == blk)].f_star
        if fd.tg and t > 0:
            ph = fd.bus_map[fd.tg.bus].phases
            rec.tg_p_kw = [_v(sol, vid("ptg", n, t)) if n in ph else 0.0 for n in PHASES]
            rec.tg_q_kvar = [_v(sol, vid("qtg", n, t)) if n in ph else 0.0 for n in PHASES]
        for pv in fd.pvs:
            rec.pv_p_kw[pv.id] = _v(sol, vid("ppv", pv.id, t)) if t > 0 else 0.0
            rec.pv_q_kvar[pv.id] = _v(sol, vid("qpv", pv.id, t)) if t > 0 else 0.0
        if t > 0:
            on_buses = {b for blk in blocks_on for b in fd.block_map[blk].buses}
            for ln in fd.lines:
                live = ln.id in closed if ln.is_switch else fd.block_of_bus[ln.from_bus] in blocks_on
                if live:
                    rec.line_flows[ln.id] = {
                        "p": _per_phase(sol, "P", ln.id, ln.phases, t),
                        "q": _per_phase(sol, "Q", ln.id, ln.phases, t),
                    }
            for b in fd.buses:
                if b.id in on_buses:
                    rec.v_sq[b.id] = [_v(sol, vid("v", b.id, n, t)) if n in b.phases else 0.0 for n in PHASES]
        steps.append(rec)
        prev_closed = set(closed)
        prev_root = roots
    plan = RestorationPlan(
        feeder=fd.name,
        dt_minutes=index.dt_minutes,
        steps=steps,
        mode=cfg.sync_mode,
        objective=float(sol.objective),
        status=sol.status,
        settings=_settings(index),
    )
    plan.metrics = metrics(plan)
    return plan


def _settings(index: ModelIndex) -> dict:
    d = index.config.to_dict()
    # resolved values, so the plan can be replayed without the config file
    d["dt_minutes"] = index.dt_minutes
    d["horizon_steps"] = index.steps
    d["clpu"] = {"alpha1": index.clpu.alpha1, "alpha2": index.clpu.alpha2, "alpha3": index.clpu.alpha3}
    rec = next((t for t, y in enumerate(index.tg_status) if y), None)
    d["tg_recovery_step"] = rec
    d["override_tg"] = True
    d["big_m_flow"] = index.big_m_flow
    return d
