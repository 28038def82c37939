"""Command-line front end.

Exit codes: 0 success, 1 error (bad input, unreadable plan, solver
failure), 2 infeasible planning problem, 3 plan rejected by ``validate``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import cases
from .der import GfmiParams, OverdampedWarning, damping_ratio
from .feeder import FeederError, FeederModel, dump_feeder, load_feeder_file, parse_feeder
from .milp import ModelError, emit_lp, emit_mps
from .planner import FAMILIES, PlanError, PlanInfeasible, PlanningConfig, RestorationPlan, build_model, solve_plan
from .validator import validate_plan, verify_frequency_estimates

log = logging.getLogger("blackstart")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_FAILED = 0, 1, 2, 3

# 20 MVA inverter with the VSG constants of the verification study
FREQ_FIXTURE = GfmiParams(s_rat=20000.0, c=20000.0, h=4.0, d=1.0, kf=89.0, gamma=0.093)


class CliError(Exception):
    pass


# ------------------------------------------------------------------ helpers


def _feeder_doc(spec: str, seed: int) -> dict:
    if spec.startswith("builtin:"):
        name = spec[len("builtin:"):]
        if name == "random":
            return cases.random_toy(seed)
        try:
            return cases.builtin(name)
        except KeyError as exc:
            raise CliError(str(exc.args[0])) from None
    path = Path(spec)
    if not path.is_file():
        raise CliError(f"feeder file not found: {spec}")
    return json.loads(path.read_text())


def load_feeder_arg(args) -> FeederModel:
    if not args.feeder:
        raise CliError("--feeder is required")
    if args.feeder.startswith("builtin:"):
        return parse_feeder(_feeder_doc(args.feeder, args.seed))
    if not Path(args.feeder).is_file():
        raise CliError(f"feeder file not found: {args.feeder}")
    return load_feeder_file(args.feeder)


def config_arg(args) -> PlanningConfig:
    d = {}
    if args.config:
        p = Path(args.config)
        if not p.is_file():
            raise CliError(f"config file not found: {args.config}")
        d = json.loads(p.read_text())
    if args.mode:
        d["sync_mode"] = args.mode.replace("-", "_")
    if args.tg_recovery_step is not None:
        d["tg_recovery_step"] = args.tg_recovery_step
    if getattr(args, "quad_mode", None):
        d["quad_mode"] = args.quad_mode
    return PlanningConfig.from_dict(d)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str):
    path.write_text(text)
    log.info("wrote %s", path)


def _summary(plan: RestorationPlan) -> dict:
    m = plan.metrics
    return {
        "feeder": plan.feeder,
        "mode": plan.mode,
        "status": plan.status,
        "objective_kwh": plan.objective,
        "customer_hours_mwh": m.customer_hours_mwh,
        "restoration_time_min": m.restoration_time_min,
        "restored_step": m.restored_step,
        "diversified_mwh": m.diversified_mwh,
        "closures": [[s.t, c.switch, c.kind, c.sync] for s in plan.steps for c in s.closures],
    }


# ----------------------------------------------------------------- commands


def cmd_plan(args) -> int:
    fd = load_feeder_arg(args)
    cfg = config_arg(args)
    out = _out(args)
    try:
        plan = solve_plan(fd, cfg, backend=args.backend)
    except PlanInfeasible as exc:
        _write(out / "infeasible.json", json.dumps({"message": str(exc), "report": exc.report}, indent=1, default=str))
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    _write(out / "plan.json", plan.to_json())
    _write(out / "plan.csv", plan.to_csv())
    summary = _summary(plan)
    _write(out / "metrics.json", json.dumps(summary, indent=1))
    rt = summary["restoration_time_min"]
    print(f"{plan.feeder}: {plan.mode} plan, {plan.metrics.customer_hours_mwh:.4f} MWh served, "
          f"restoration {'not complete' if rt is None else f'{rt:g} min'}")
    return EXIT_OK


def cmd_validate(args) -> int:
    fd = load_feeder_arg(args)
    if not args.plan:
        raise CliError("--plan is required")
    p = Path(args.plan)
    if not p.is_file():
        raise CliError(f"plan file not found: {args.plan}")
    try:
        plan = RestorationPlan.from_json(p.read_text())
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    cfg = config_arg(args) if (args.config or args.mode or args.tg_recovery_step is not None) else None
    report = validate_plan(fd, plan, cfg)
    out = _out(args)
    _write(out / "validation.json", report.to_json())
    _write(out / "validation.txt", report.to_text())
    for f in report.failures():
        print(f.line())
    print(f"verdict: {report.verdict}")
    return EXIT_OK if report.ok else EXIT_FAILED


def _freq_params(args) -> GfmiParams:
    if args.params:
        d = json.loads(Path(args.params).read_text())
        d.setdefault("c", d.pop("c_kwh", 1.0))
        if "s_rat_kva" in d:
            d["s_rat"] = d.pop("s_rat_kva")
        return GfmiParams(**d)
    if args.feeder:
        fd = load_feeder_arg(args)
        bus = args.gfmi or sorted(fd.gfmis)[0]
        if bus not in fd.gfmis:
            raise CliError(f"no GFMI at bus {bus}")
        return fd.gfmis[bus]
    return FREQ_FIXTURE


def cmd_freq_verify(args) -> int:
    prm = _freq_params(args)
    pickups = [float(x) * 1000.0 for x in args.pickups_mw.split(",") if x.strip()] if args.pickups_mw else []
    out = _out(args)
    notes = []
    if prm.gamma == 0.0:
        notes.append("note: gamma = 0 (overdamped loop, no frequency overshoot); nadir equals the QSS value")
    elif prm.t_lp is not None:
        _, xi = damping_ratio(prm.h, prm.d, prm.kf, prm.t_lp)
        if xi >= 1.0:
            notes.append("note: overdamped parameters, gamma = 0")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", OverdampedWarning)
        rows, trajs = verify_frequency_estimates(prm, pickups, keep_trajectories=True)
        if any(issubclass(w.category, OverdampedWarning) for w in caught):
            notes.append("note: overdamped parameters, gamma = 0")
    head = ["pickup_mw", "rocof_measured", "rocof_estimated", "rocof_accuracy_pct",
            "nadir_measured", "nadir_estimated", "nadir_accuracy_pct",
            "qss_measured", "qss_estimated", "qss_accuracy_pct"]
    with open(out / "freq_verify.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(head)
        for r in rows:
            w.writerow([r.pickup_kw / 1000.0, r.measured_rocof, r.estimated_rocof, r.accuracy_rocof,
                        r.measured_nadir, r.estimated_nadir, r.accuracy_nadir,
                        r.measured_qss, r.estimated_qss, r.accuracy_qss])
    lines = [f"S = {prm.s_rat / 1000:g} MVA, H = {prm.h:g}, D = {prm.d:g}, Kf = {prm.kf:g}, gamma = {prm.gamma:g}",
             f"{'pickup':>8s} {'':8s} {'RoCoF Hz/s':>12s} {'nadir Hz':>10s} {'QSS Hz':>10s}"]
    for r in rows:
        mw = r.pickup_kw / 1000.0
        lines.append(f"{mw:6.2f}MW {'measured':8s} {r.measured_rocof:12.4f} {r.measured_nadir:10.4f} {r.measured_qss:10.4f}")
        lines.append(f"{'':8s} {'estimate':8s} {r.estimated_rocof:12.4f} {r.estimated_nadir:10.4f} {r.estimated_qss:10.4f}")
        lines.append(f"{'':8s} {'acc. %':8s} {r.accuracy_rocof:12.2f} {r.accuracy_nadir:10.2f} {r.accuracy_qss:10.2f}")
    lines += sorted(set(notes))
    text = "\n".join(lines) + "\n"
    _write(out / "freq_verify.txt", text)
    for r, tr in zip(rows, trajs):
        if tr is None:
            continue
        with open(out / f"trajectory_{r.pickup_kw / 1000.0:g}MW.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s", "f_hz"])
            step = max(1, len(tr.t) // 3000)
            for k in range(0, len(tr.t), step):
                w.writerow([round(float(tr.t[k]), 6), round(float(tr.f[k]), 7)])
    print(text, end="")
    return EXIT_OK


def cmd_emit_model(args) -> int:
    fd = load_feeder_arg(args)
    cfg = config_arg(args)
    model, _ = build_model(fd, cfg)
    out = _out(args)
    _write(out / "model.lp", emit_lp(model))
    census = model.census()
    rows = [{"family": f, "constraints": census.get(f, 0)} for f in FAMILIES]
    _write(out / "census.json", json.dumps({"families": rows, "binaries": len(model.binaries),
                                             "variables": len(model.vars), "quadratic": model.has_quadratic}, indent=1))
    text = "\n".join(f"{r['family']:<14s} {r['constraints']:>8d}" for r in rows) + "\n"
    _write(out / "census.txt", text)
    print(text, end="")
    if model.has_quadratic:
        msg = ("MPS not written: the model has quadratic capability rows and MPS here is linear-only; "
               "rerun with --quad-mode polygon to get a linear model")
        if args.mps:
            print(f"refused: {msg}", file=sys.stderr)
            return EXIT_ERROR
        log.info(msg)
    else:
        _write(out / "model.mps", emit_mps(model))
    return EXIT_OK


def _report_job(job):
    doc, cfg_dict, backend, rec = job
    fd = parse_feeder(doc)
    row = {"tg_recovery_step": rec}
    for mode in ("optimal", "rule_based"):
        cfg = PlanningConfig.from_dict({**cfg_dict, "sync_mode": mode, "tg_recovery_step": rec})
        try:
            plan = solve_plan(fd, cfg, backend=backend, diagnose=False)
            row[f"{mode}_mwh"] = plan.metrics.customer_hours_mwh
            row[f"{mode}_restoration_min"] = plan.metrics.restoration_time_min
        except PlanInfeasible:
            row[f"{mode}_mwh"] = None
            row[f"{mode}_restoration_min"] = None
    a, b = row["optimal_mwh"], row["rule_based_mwh"]
    row["improvement_pct"] = None if a is None or not b else 100.0 * (a - b) / b
    return row


def _steps_arg(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            a, b = part.split(":")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def cmd_report(args) -> int:
    fd = load_feeder_arg(args)
    cfg = config_arg(args)
    doc = dump_feeder(fd)
    cfg_dict = cfg.to_dict()
    cfg_dict.pop("sync_mode", None)
    cfg_dict.pop("tg_recovery_step", None)
    if args.tg_recovery_sweep:
        steps = _steps_arg(args.tg_recovery_sweep)
    else:
        steps = [cfg.tg_recovery_step if cfg.tg_recovery_step is not None else (fd.tg.recovery_step if fd.tg else None)]
    jobs = [(doc, cfg_dict, args.backend, rec) for rec in steps]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_report_job, jobs))
    else:
        rows = [_report_job(j) for j in jobs]
    out = _out(args)
    keys = ["tg_recovery_step", "optimal_mwh", "rule_based_mwh", "improvement_pct",
            "optimal_restoration_min", "rule_based_restoration_min"]
    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        w.writerows(rows)
    _write(out / "report.json", json.dumps(rows, indent=1))

    def fmt(x, spec):
        return "-" if x is None else format(x, spec)

    print(f"{'TG step':>7s} {'optimal MWh':>12s} {'rule MWh':>10s} {'gain %':>7s} {'t_opt min':>9s} {'t_rule min':>10s}")
    for r in rows:
        print(f"{fmt(r['tg_recovery_step'], 'd'):>7s} {fmt(r['optimal_mwh'], '.4f'):>12s} {fmt(r['rule_based_mwh'], '.4f'):>10s} "
              f"{fmt(r['improvement_pct'], '.2f'):>7s} {fmt(r['optimal_restoration_min'], 'g'):>9s} "
              f"{fmt(r['rule_based_restoration_min'], 'g'):>10s}")
    return EXIT_OK


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--feeder", help="feeder JSON path or builtin:<name> (toy2, toy3, toy3tg, toy4, ieee123, ieee123-4, random)")
    common.add_argument("--config", help="planning options JSON")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--backend", default="exhaustive", help="exhaustive | cbc | external:<command with {model} {solution}>")
    common.add_argument("--mode", choices=["optimal", "rule-based"], help="synchronizing setting")
    common.add_argument("--tg-recovery-step", type=int, help="step at which the transmission grid returns")
    common.add_argument("--seed", type=int, default=0, help="seed for builtin:random")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="blackstart", description="Blackstart restoration planning for inverter-fed feeders.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", parents=[common], help="solve for a restoration plan")
    p.add_argument("--quad-mode", help="quadratic | polygon | polygon(n)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("validate", parents=[common], help="replay and check a plan")
    p.add_argument("--plan", help="plan JSON written by `plan`")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("freq-verify", parents=[common], help="closed-form frequency estimates against simulation")
    p.add_argument("--params", help="GFMI parameter JSON (s_rat_kva, h, d, kf, gamma, ...)")
    p.add_argument("--gfmi", help="GFMI bus when taking parameters from --feeder")
    p.add_argument("--pickups-mw", default="1,2,10", help="comma-separated load steps in MW")
    p.set_defaults(func=cmd_freq_verify)

    p = sub.add_parser("emit-model", parents=[common], help="write the model as LP/MPS with a census")
    p.add_argument("--quad-mode", help="quadratic | polygon | polygon(n)")
    p.add_argument("--mps", action="store_true", help="require an MPS file (fails on quadratic models)")
    p.set_defaults(func=cmd_emit_model)

    p = sub.add_parser("report", parents=[common], help="optimal vs rule-based comparison")
    p.add_argument("--quad-mode", help="quadratic | polygon | polygon(n)")
    p.add_argument("--tg-recovery-sweep", help="steps, e.g. 5,9,13 or 5:13")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for the sweep")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (CliError, FeederError, ModelError, PlanError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
