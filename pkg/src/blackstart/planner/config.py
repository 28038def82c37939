"""Planning options; defaults follow common NERC-style practice."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace

from ..clpu import ClpuCoefficients

SYNC_MODES = ("optimal", "rule_based")
TIE_BREAKS = ("reconnect", "none")


@dataclass(frozen=True)
class PlanningConfig:
    dt_minutes: float | None = None  # None: take the feeder horizon
    horizon_steps: int | None = None
    start_step: int = 0  # offset into the load/PV profiles
    sync_mode: str = "optimal"
    rule_order: tuple[str, ...] | None = None  # GFMI buses; None = BFS distance from the TG
    qss_lo: float = 59.5
    qss_hi: float = 60.5
    nadir_min: float = 59.3
    nadir_max: float = 60.7
    rocof_min: float = -2.0
    rocof_max: float = 2.0
    v_min_sq: float = 0.9025
    v_max_sq: float = 1.1025
    clpu: ClpuCoefficients | None = None  # None: feeder coefficients
    big_m_flow: float | None = None  # None: total feeder apparent power
    big_m_v: float = 1.1025
    big_m_f: float = 61.0
    eps_p: float = 1.0  # kW
    eps_q: float = 1.0  # kvar
    eps_f: float = 0.01  # Hz
    eps_v: float = 0.01  # pu^2 voltage mismatch tolerated across an SSW at its sync instant
    soc_min: float = 0.2
    delta_f_star_max: float = 0.5
    quad_mode: str = "quadratic"
    tg_recovery_step: int | None = field(default=None)
    override_tg: bool = False  # apply tg_recovery_step even when None
    tie_break: str = "reconnect"  # among equal-energy plans, merge islands (and hand roots over) early

    def __post_init__(self):
        if self.sync_mode not in SYNC_MODES:
            raise ValueError(f"sync_mode must be one of {SYNC_MODES}")
        if self.tie_break not in TIE_BREAKS:
            raise ValueError(f"tie_break must be one of {TIE_BREAKS}")
        if not self.rocof_min < 0 < self.rocof_max:
            raise ValueError("need rocof_min < 0 < rocof_max")
        if self.dt_minutes is not None and self.dt_minutes <= 0:
            raise ValueError("dt_minutes must be positive")
        if self.horizon_steps is not None and self.horizon_steps < 1:
            raise ValueError("horizon_steps must be at least 1")
        if not 0 <= self.soc_min < 1:
            raise ValueError("soc_min must lie in [0, 1)")
        if self.qss_lo >= self.qss_hi or self.nadir_min >= self.nadir_max:
            raise ValueError("frequency bands must have lo < hi")
        if not 0 < self.v_min_sq < self.v_max_sq:
            raise ValueError("voltage box must satisfy 0 < v_min_sq < v_max_sq")
        if self.start_step < 0:
            raise ValueError("start_step must be non-negative")

    def with_(self, **kw) -> "PlanningConfig":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.clpu is not None:
            d["clpu"] = {"alpha1": self.clpu.alpha1, "alpha2": self.clpu.alpha2, "alpha3": self.clpu.alpha3}
        if self.rule_order is not None:
            d["rule_order"] = list(self.rule_order)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PlanningConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown planning options: {sorted(extra)}")
        d = dict(d)
        if d.get("clpu") is not None and not isinstance(d["clpu"], ClpuCoefficients):
            d["clpu"] = ClpuCoefficients(**d["clpu"])
        if d.get("rule_order") is not None:
            d["rule_order"] = tuple(str(b) for b in d["rule_order"])
        if d.get("sync_mode") == "rule-based":
            d["sync_mode"] = "rule_based"
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "PlanningConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
