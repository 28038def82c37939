"""Time-stepped restoration plan, its serialization and restoration metrics."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

PLAN_FORMAT = 1


@dataclass
class Closure:
    switch: str
    kind: str  # ESW | SSW
    sync: bool = False  # SSW closed with both sides live


@dataclass
class GfmiState:
    bus: str
    p_kw: list[float]  # phases a, b, c (0 where absent)
    q_kvar: list[float]
    soc: float
    f_hz: float
    is_root: bool
    delta: bool = False  # hands its root over at this step
    f_shift_hz: float = 0.0  # cooperative synchronizing offset applied at this step

    @property
    def p_total(self) -> float:
        return sum(self.p_kw)

    @property
    def q_total(self) -> float:
        return sum(self.q_kvar)


@dataclass
class StepRecord:
    t: int
    closures: list[Closure] = field(default_factory=list)  # switches that close at t
    closed_switches: list[str] = field(default_factory=list)
    blocks_on: list[str] = field(default_factory=list)
    loads_on: list[str] = field(default_factory=list)
    gfmi: list[GfmiState] = field(default_factory=list)
    tg_on: bool = False
    block_f_hz: dict[str, float] = field(default_factory=dict)
    tg_p_kw: list[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    tg_q_kvar: list[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    pv_p_kw: dict[str, float] = field(default_factory=dict)
    pv_q_kvar: dict[str, float] = field(default_factory=dict)
    load_kw: dict[str, float] = field(default_factory=dict)  # every load, CLPU-inflated
    diversified_kw: float = 0.0  # served load without the CLPU surge
    line_flows: dict[str, dict[str, list[float]]] = field(default_factory=dict)  # energized lines only
    v_sq: dict[str, list[float]] = field(default_factory=dict)  # energized buses only

    @property
    def roots(self) -> int:
        return sum(g.is_root for g in self.gfmi) + int(self.tg_on)

    @property
    def served_kw(self) -> float:
        return sum(self.load_kw.values())

    def gfmi_at(self, bus: str) -> GfmiState:
        for g in self.gfmi:
            if g.bus == bus:
                return g
        raise KeyError(bus)


@dataclass
class Metrics:
    customer_hours_mwh: float
    restoration_time_min: float | None  # None: not restored within the horizon
    diversified_mwh: float
    restored_step: int | None = None

    @property
    def restored(self) -> bool:
        return self.restoration_time_min is not None


@dataclass
class RestorationPlan:
    feeder: str
    dt_minutes: float
    steps: list[StepRecord]
    metrics: Metrics | None = None
    mode: str = "optimal"
    objective: float = 0.0
    status: str = "optimal"
    settings: dict = field(default_factory=dict)  # planning options used (PlanningConfig.to_dict)

    @property
    def horizon(self) -> int:
        return len(self.steps) - 1

    def step(self, t: int) -> StepRecord:
        return self.steps[t]

    # ------------------------------------------------------------- JSON
    def to_dict(self) -> dict:
        return {
            "format": PLAN_FORMAT,
            "feeder": self.feeder,
            "mode": self.mode,
            "status": self.status,
            "objective": self.objective,
            "dt_minutes": self.dt_minutes,
            "settings": self.settings,
            "steps": [asdict(s) for s in self.steps],
            "metrics": asdict(self.metrics) if self.metrics else None,
        }

    def to_json(self, indent: int | None = 1) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, d: dict) -> "RestorationPlan":
        try:
            steps = []
            for s in d["steps"]:
                s = dict(s)
                s["closures"] = [Closure(**c) for c in s.get("closures", [])]
                s["gfmi"] = [GfmiState(**g) for g in s.get("gfmi", [])]
                steps.append(StepRecord(**s))
            met = Metrics(**d["metrics"]) if d.get("metrics") else None
            return cls(
                feeder=d.get("feeder", ""),
                dt_minutes=float(d["dt_minutes"]),
                steps=steps,
                metrics=met,
                mode=d.get("mode", "optimal"),
                objective=float(d.get("objective", 0.0)),
                status=d.get("status", "optimal"),
                settings=dict(d.get("settings") or {}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed plan: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "RestorationPlan":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed plan: {exc}") from exc
        if not isinstance(doc, dict):
            raise ValueError("malformed plan: top level must be an object")
        return cls.from_dict(doc)

    # -------------------------------------------------------------- CSV
    def to_csv(self) -> str:
        """One row per step for plotting."""
        buses = [g.bus for g in self.steps[0].gfmi] if self.steps else []
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        head = ["t", "minutes", "served_kw", "diversified_kw", "n_closed", "n_blocks_on", "roots", "tg_on", "tg_p_kw"]
        for b in buses:
            head += [f"gfmi_{b}_p_kw", f"gfmi_{b}_q_kvar", f"gfmi_{b}_soc", f"gfmi_{b}_f_hz", f"gfmi_{b}_root"]
        head += ["pv_p_kw", "closures"]
        w.writerow(head)
        for s in self.steps:
            row = [s.t, s.t * self.dt_minutes, _r(s.served_kw), _r(s.diversified_kw), len(s.closed_switches),
                   len(s.blocks_on), s.roots, int(s.tg_on), _r(sum(s.tg_p_kw))]
            for b in buses:
                g = s.gfmi_at(b)
                row += [_r(g.p_total), _r(g.q_total), _r(g.soc), _r(g.f_hz), int(g.is_root)]
            row += [_r(sum(s.pv_p_kw.values())), " ".join(f"{c.switch}{'*' if c.sync else ''}" for c in s.closures)]
            w.writerow(row)
        return out.getvalue()


def _r(x: float) -> float:
    return round(float(x), 6)


def metrics(plan: RestorationPlan) -> Metrics:
    """Customer-hours served and the time at which restoration completes.

    Restoration is complete at the first step where every load is served and
    the whole energized network hangs off the transmission grid, i.e. the TG
    is back and no GFMI is still a root.
    """
    dt_h = plan.dt_minutes / 60.0
    served = sum(s.served_kw for s in plan.steps[1:]) * dt_h / 1000.0
    diversified = sum(s.diversified_kw for s in plan.steps[1:]) * dt_h / 1000.0
    done = None
    for s in plan.steps[1:]:
        if s.tg_on and not any(g.is_root for g in s.gfmi) and len(s.loads_on) == len(s.load_kw):
            done = s.t
            break
    return Metrics(
        customer_hours_mwh=served,
        restoration_time_min=None if done is None else done * plan.dt_minutes,
        diversified_mwh=diversified,
        restored_step=done,
    )
