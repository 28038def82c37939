"""Feeder description: schema, loading, validation and bus-block partition."""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Any, Iterable

import jsonschema
import networkx as nx
import numpy as np

from .clpu import ClpuCoefficients
from .der import GfmiParams

PHASES = ("a", "b", "c")
BUS_KINDS = ("plain", "gfmi_root", "tg_interconnect")
SWITCH_KINDS = ("ESW", "SSW")
SWITCH_Z_EPS = 1e-6  # ohm


class FeederError(ValueError):
    """A feeder description that is well-formed JSON but physically inconsistent."""


def natural_key(name: str):
    """Sort key that orders embedded integers numerically (``"9" < "10" < "10r"``)."""
    return tuple(int(tok) if tok.isdigit() else tok for tok in re.split(r"(\d+)", str(name)) if tok)


def _norm_phases(ph) -> tuple[str, ...]:
    items = list(ph) if not isinstance(ph, str) else list(ph.lower())
    return tuple(sorted({p.lower() for p in items}, key=PHASES.index))


@dataclass(frozen=True)
class Bus:
    id: str
    phases: tuple[str, ...]
    kind: str = "plain"


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: str
    to_bus: str
    phases: tuple[str, ...]
    r: np.ndarray = field(compare=False, repr=False)
    x: np.ndarray = field(compare=False, repr=False)
    switch: str | None = None

    @property
    def is_switch(self) -> bool:
        return self.switch is not None

    def impedance(self) -> np.ndarray:
        return self.r + 1j * self.x

    def __eq__(self, other):
        if not isinstance(other, Line):
            return NotImplemented
        return (
            (self.id, self.from_bus, self.to_bus, self.phases, self.switch)
            == (other.id, other.from_bus, other.to_bus, other.phases, other.switch)
            and np.array_equal(self.r, other.r)
            and np.array_equal(self.x, other.x)
        )

    __hash__ = object.__hash__


@dataclass(frozen=True)
class BusBlock:
    id: str
    buses: tuple[str, ...]
    internal_lines: tuple[str, ...]
    boundary_switches: tuple[str, ...]


@dataclass(frozen=True)
class Load:
    id: str
    bus: str
    phase: str
    switchable: bool
    pf_angle: float
    profile: tuple[float, ...]


@dataclass(frozen=True)
class PvUnit:
    id: str
    bus: str
    phases: tuple[str, ...]
    rated_kw: float
    profile: tuple[float, ...]


@dataclass(frozen=True)
class TgInterconnect:
    bus: str
    ss_rat: float
    recovery_step: int | None = None


@dataclass(frozen=True)
class Horizon:
    dt_minutes: float = 15.0
    steps: int = 24
    start_label: str = "00:00"


@dataclass(frozen=True, eq=False)
class FeederModel:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    loads: tuple[Load, ...] = ()
    pvs: tuple[PvUnit, ...] = ()
    gfmis: dict[str, GfmiParams] = field(default_factory=dict)
    tg: TgInterconnect | None = None
    horizon: Horizon = Horizon()
    clpu: ClpuCoefficients = ClpuCoefficients()
    base_kv_ll: float = 4.16
    name: str = ""

    def __eq__(self, other):
        if not isinstance(other, FeederModel):
            return NotImplemented
        return dump_feeder(self) == dump_feeder(other)

    __hash__ = object.__hash__

    @cached_property
    def bus_map(self) -> dict[str, Bus]:
        return {b.id: b for b in self.buses}

    @cached_property
    def line_map(self) -> dict[str, Line]:
        return {ln.id: ln for ln in self.lines}

    @property
    def switches(self) -> list[Line]:
        return [ln for ln in self.lines if ln.is_switch]

    @cached_property
    def blocks(self) -> tuple[BusBlock, ...]:
        return tuple(partition_blocks(self))

    @cached_property
    def block_of_bus(self) -> dict[str, str]:
        return {b: blk.id for blk in self.blocks for b in blk.buses}

    @cached_property
    def block_map(self) -> dict[str, BusBlock]:
        return {blk.id: blk for blk in self.blocks}

    @cached_property
    def adjacency(self) -> dict[str, tuple[str, str]]:
        return block_adjacency(self)

    @property
    def tg_block(self) -> str | None:
        return self.block_of_bus[self.tg.bus] if self.tg else None

    @cached_property
    def source_blocks(self) -> dict[str, str]:
        """GFMI bus -> block id; these blocks are energized from the start."""
        return {bus: self.block_of_bus[bus] for bus in self.gfmis}

    def tg_status(self, t: int) -> int:
        """1 when the transmission grid is available at decision step ``t`` (1-based)."""
        if self.tg is None or self.tg.recovery_step is None:
            return 0
        return int(t >= self.tg.recovery_step)

    @property
    def base_kv_ln(self) -> float:
        return self.base_kv_ll / math.sqrt(3.0)

    def with_tg_recovery(self, step: int | None) -> "FeederModel":
        if self.tg is None:
            raise FeederError("feeder has no transmission interconnect")
        doc = dump_feeder(self)
        doc["tg"]["recovery_step"] = step
        return parse_feeder(doc)


# --------------------------------------------------------------------------- partition


def partition_blocks(model: FeederModel) -> list[BusBlock]:
    """Connected components of the network with every switch edge removed.

    Blocks are numbered ``B1, B2, ...`` in order of their smallest bus id.
    """
    g = nx.MultiGraph()
    g.add_nodes_from(b.id for b in model.buses)
    for ln in model.lines:
        if not ln.is_switch:
            g.add_edge(ln.from_bus, ln.to_bus, key=ln.id)
    comps = [sorted(c, key=natural_key) for c in nx.connected_components(g)]
    comps.sort(key=lambda c: natural_key(c[0]))
    index = {b: k for k, comp in enumerate(comps) for b in comp}
    internal: list[list[str]] = [[] for _ in comps]
    boundary: list[list[str]] = [[] for _ in comps]
    for ln in model.lines:
        if ln.is_switch:
            for k in {index[ln.from_bus], index[ln.to_bus]}:
                boundary[k].append(ln.id)
        else:
            internal[index[ln.from_bus]].append(ln.id)
    return [
        BusBlock(f"B{k + 1}", tuple(comp), tuple(internal[k]), tuple(boundary[k]))
        for k, comp in enumerate(comps)
    ]


def block_adjacency(model: FeederModel) -> dict[str, tuple[str, str]]:
    """Switch id -> (block of its from-bus, block of its to-bus)."""
    of = model.block_of_bus
    out = {}
    for ln in model.switches:
        a, b = of[ln.from_bus], of[ln.to_bus]
        if a == b:
            raise FeederError(f"switch {ln.id} joins block {a} to itself")
        out[ln.id] = (a, b)
    return out


def block_graph(model: FeederModel) -> nx.MultiGraph:
    g = nx.MultiGraph()
    g.add_nodes_from(blk.id for blk in model.blocks)
    for sw, (a, b) in model.adjacency.items():
        g.add_edge(a, b, key=sw)
    return g


# --------------------------------------------------------------------------- schema

_PHASES_SCHEMA = {
    "anyOf": [
        {"type": "string", "pattern": "^[abcABC]{1,3}$"},
        {"type": "array", "items": {"enum": list(PHASES) + ["A", "B", "C"]}, "minItems": 1, "maxItems": 3},
    ]
}
_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
_PROFILE = {"type": "array", "items": {"type": "number"}}

FEEDER_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["buses", "lines"],
    "properties": {
        "name": {"type": "string"},
        "base_kv_ll": {"type": "number", "exclusiveMinimum": 0},
        "buses": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "phases"],
                "properties": {
                    "id": {"type": ["string", "integer"]},
                    "phases": _PHASES_SCHEMA,
                    "kind": {"enum": list(BUS_KINDS)},
                },
                "additionalProperties": False,
            },
        },
        "lines": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["from", "to", "phases"],
                "properties": {
                    "id": {"type": "string"},
                    "from": {"type": ["string", "integer"]},
                    "to": {"type": ["string", "integer"]},
                    "phases": _PHASES_SCHEMA,
                    "r_matrix": _MATRIX,
                    "x_matrix": _MATRIX,
                    "switch": {"enum": [None, *SWITCH_KINDS]},
                },
                "additionalProperties": False,
            },
        },
        "loads": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["bus", "phase", "profile"],
                "properties": {
                    "id": {"type": "string"},
                    "bus": {"type": ["string", "integer"]},
                    "phase": {"enum": list(PHASES)},
                    "switchable": {"type": "boolean"},
                    "pf_angle": {"type": "number"},
                    "profile": _PROFILE,
                },
                "additionalProperties": False,
            },
        },
        "pvs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["bus", "phases", "rated_kw", "profile"],
                "properties": {
                    "id": {"type": "string"},
                    "bus": {"type": ["string", "integer"]},
                    "phases": _PHASES_SCHEMA,
                    "rated_kw": {"type": "number"},
                    "profile": _PROFILE,
                },
                "additionalProperties": False,
            },
        },
        "gfmis": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["bus", "s_rat_kva", "c_kwh", "h", "d", "kf"],
                "properties": {
                    "bus": {"type": ["string", "integer"]},
                    "s_rat_kva": {"type": "number"},
                    "c_kwh": {"type": "number"},
                    "h": {"type": "number"},
                    "d": {"type": "number"},
                    "kf": {"type": "number"},
                    "kv": {"type": "number"},
                    "gamma": {"type": "number"},
                    "t_lp": {"type": ["number", "null"]},
                    "v_star": {"type": "number"},
                    "f_star": {"type": "number"},
                },
                "additionalProperties": False,
            },
        },
        "tg": {
            "type": ["object", "null"],
            "required": ["bus", "ss_rat_kva"],
            "properties": {
                "bus": {"type": ["string", "integer"]},
                "ss_rat_kva": {"type": "number", "exclusiveMinimum": 0},
                "recovery_step": {"type": ["integer", "null"], "minimum": 1},
            },
            "additionalProperties": False,
        },
        "horizon": {
            "type": "object",
            "properties": {
                "dt_minutes": {"type": "number", "exclusiveMinimum": 0},
                "steps": {"type": "integer", "minimum": 1},
                "start_label": {"type": "string"},
            },
            "additionalProperties": False,
        },
        "clpu": {
            "type": "object",
            "properties": {k: {"type": "number"} for k in ("alpha1", "alpha2", "alpha3")},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


def _path(err: jsonschema.ValidationError) -> str:
    return "/" + "/".join(str(p) for p in err.absolute_path)


def load_feeder(source: bytes | str | IO) -> FeederModel:
    """Parse and validate a feeder JSON document (bytes, text or file object)."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise FeederError(f"malformed JSON: {exc}") from exc
    return parse_feeder(doc)


def load_feeder_file(path) -> FeederModel:
    with open(path, "rb") as fh:
        return load_feeder(fh)


def _matrix(rows, n: int, what: str) -> np.ndarray:
    if rows is None:
        return np.zeros((n, n))
    arr = np.asarray(rows, dtype=float)
    if arr.shape != (n, n):
        raise FeederError(f"{what}: expected {n}x{n} matrix, got shape {arr.shape}")
    return arr


def parse_feeder(doc: dict) -> FeederModel:
    validator = jsonschema.Draft7Validator(FEEDER_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise FeederError(f"schema violation at {_path(e)}: {e.message}")

    hz = doc.get("horizon", {})
    horizon = Horizon(
        float(hz.get("dt_minutes", 15.0)), int(hz.get("steps", 24)), str(hz.get("start_label", "00:00"))
    )

    buses = []
    seen = set()
    for k, b in enumerate(doc["buses"]):
        bid = str(b["id"])
        if bid in seen:
            raise FeederError(f"/buses/{k}: duplicate bus id {bid!r}")
        seen.add(bid)
        buses.append(Bus(bid, _norm_phases(b["phases"]), b.get("kind", "plain")))
    bus_map = {b.id: b for b in buses}

    lines = []
    line_ids = set()
    for k, ln in enumerate(doc["lines"]):
        fb, tb = str(ln["from"]), str(ln["to"])
        lid = ln.get("id") or f"{fb}-{tb}"
        where = f"/lines/{k} ({lid})"
        if lid in line_ids:
            raise FeederError(f"{where}: duplicate line id")
        line_ids.add(lid)
        for end in (fb, tb):
            if end not in bus_map:
                raise FeederError(f"{where}: unknown bus {end!r}")
        if fb == tb:
            raise FeederError(f"{where}: line connects a bus to itself")
        ph = _norm_phases(ln["phases"])
        missing = set(ph) - (set(bus_map[fb].phases) & set(bus_map[tb].phases))
        if missing:
            raise FeederError(f"{where}: phases {sorted(missing)} absent at an end bus")
        r = _matrix(ln.get("r_matrix"), len(ph), f"{where}/r_matrix")
        x = _matrix(ln.get("x_matrix"), len(ph), f"{where}/x_matrix")
        sw = ln.get("switch")
        if sw is not None and max(np.abs(r).max(), np.abs(x).max()) > SWITCH_Z_EPS:
            raise FeederError(f"{where}: switch impedance exceeds {SWITCH_Z_EPS} ohm")
        lines.append(Line(lid, fb, tb, ph, r, x, sw))

    steps = horizon.steps
    loads = []
    kinds_at_bus: dict[str, set[bool]] = {}
    load_ids = set()
    for k, ld in enumerate(doc.get("loads", [])):
        bus = str(ld["bus"])
        lid = ld.get("id") or f"{bus}.{ld['phase']}"
        where = f"/loads/{k} ({lid})"
        if lid in load_ids:
            raise FeederError(f"{where}: duplicate load id")
        load_ids.add(lid)
        if bus not in bus_map:
            raise FeederError(f"{where}: unknown bus {bus!r}")
        if ld["phase"] not in bus_map[bus].phases:
            raise FeederError(f"{where}: load on absent phase {ld['phase']!r} of bus {bus}")
        if len(ld["profile"]) < steps:
            raise FeederError(f"{where}: profile shorter than horizon ({len(ld['profile'])} < {steps})")
        if any(v < 0 for v in ld["profile"]):
            raise FeederError(f"{where}: negative demand in profile")
        pf = float(ld.get("pf_angle", 0.0))
        if abs(pf) >= math.pi / 2:
            raise FeederError(f"{where}: pf_angle must lie in (-pi/2, pi/2)")
        sw = bool(ld.get("switchable", False))
        kinds_at_bus.setdefault(bus, set()).add(sw)
        if len(kinds_at_bus[bus]) > 1:
            raise FeederError(f"{where}: switchable and non-switchable loads share bus {bus}")
        loads.append(Load(lid, bus, ld["phase"], sw, pf, tuple(float(v) for v in ld["profile"])))

    pvs = []
    for k, pv in enumerate(doc.get("pvs", [])):
        bus = str(pv["bus"])
        pid = pv.get("id") or f"pv{bus}"
        where = f"/pvs/{k} ({pid})"
        if bus not in bus_map:
            raise FeederError(f"{where}: unknown bus {bus!r}")
        ph = _norm_phases(pv["phases"])
        if set(ph) - set(bus_map[bus].phases):
            raise FeederError(f"{where}: PV phases absent at bus {bus}")
        rated = float(pv["rated_kw"])
        if rated <= 0:
            raise FeederError(f"{where}: rated_kw must be positive")
        prof = tuple(float(v) for v in pv["profile"])
        if len(prof) < steps:
            raise FeederError(f"{where}: profile shorter than horizon")
        if any(v > rated + 1e-9 or v < 0 for v in prof):
            raise FeederError(f"{where}: forecast outside [0, rated_kw]")
        pvs.append(PvUnit(pid, bus, ph, rated, prof))
    if len({p.id for p in pvs}) != len(pvs):
        raise FeederError("/pvs: duplicate PV id")

    gfmis = {}
    for k, g in enumerate(doc.get("gfmis", [])):
        bus = str(g["bus"])
        where = f"/gfmis/{k}"
        if bus not in bus_map:
            raise FeederError(f"{where}: unknown bus {bus!r}")
        if bus_map[bus].kind != "gfmi_root":
            raise FeederError(f"{where}: bus {bus} must have kind 'gfmi_root'")
        if bus in gfmis:
            raise FeederError(f"{where}: more than one GFMI at bus {bus}")
        try:
            gfmis[bus] = GfmiParams(
                s_rat=float(g["s_rat_kva"]),
                c=float(g["c_kwh"]),
                h=float(g["h"]),
                d=float(g["d"]),
                kf=float(g["kf"]),
                kv=float(g.get("kv", 0.05)),
                gamma=float(g.get("gamma", 0.0)),
                v_star=float(g.get("v_star", 1.0)),
                f_star=float(g.get("f_star", 60.0)),
                t_lp=g.get("t_lp"),
            )
        except ValueError as exc:
            raise FeederError(f"{where}: {exc}") from exc
    for b in buses:
        if b.kind == "gfmi_root" and b.id not in gfmis:
            raise FeederError(f"bus {b.id} has kind 'gfmi_root' but no GFMI")

    tg = None
    if doc.get("tg"):
        t = doc["tg"]
        bus = str(t["bus"])
        if bus not in bus_map or bus_map[bus].kind != "tg_interconnect":
            raise FeederError(f"/tg: bus {bus!r} must exist with kind 'tg_interconnect'")
        tg = TgInterconnect(bus, float(t["ss_rat_kva"]), t.get("recovery_step"))
    n_tg = sum(b.kind == "tg_interconnect" for b in buses)
    if n_tg > (1 if tg else 0):
        raise FeederError("at most one 'tg_interconnect' bus, and it must be referenced by /tg")

    clpu = doc.get("clpu", {})
    try:
        coeffs = ClpuCoefficients(
            clpu.get("alpha1", 0.8), clpu.get("alpha2", 0.4), clpu.get("alpha3", 0.15)
        )
    except ValueError as exc:
        raise FeederError(f"/clpu: {exc}") from exc

    model = FeederModel(
        buses=tuple(buses),
        lines=tuple(lines),
        loads=tuple(loads),
        pvs=tuple(pvs),
        gfmis=gfmis,
        tg=tg,
        horizon=horizon,
        clpu=coeffs,
        base_kv_ll=float(doc.get("base_kv_ll", 4.16)),
        name=doc.get("name", ""),
    )
    _check_topology(model)
    return model


def _check_topology(model: FeederModel):
    g = nx.MultiGraph()
    g.add_nodes_from(model.bus_map)
    for ln in model.lines:
        g.add_edge(ln.from_bus, ln.to_bus, key=ln.id)
    if not nx.is_connected(g):
        raise FeederError("network is not connected with all switches closed")
    for blk in model.blocks:
        n_lines = len(blk.internal_lines)
        if n_lines != len(blk.buses) - 1:
            raise FeederError(f"block {blk.id} contains a loop of non-switch lines")
    model.adjacency  # raises on a switch inside a block
    sources = {}
    for bus in model.gfmis:
        sources.setdefault(model.block_of_bus[bus], []).append(bus)
    for blk, members in sources.items():
        if len(members) > 1:
            raise FeederError(f"block {blk} holds more than one GFMI ({', '.join(members)}); separate them by a switch")
    if model.tg is not None:
        tb = model.block_of_bus[model.tg.bus]
        if tb in sources:
            raise FeederError(f"block {tb} holds both the TG interconnect and a GFMI")


def dump_feeder(model: FeederModel) -> dict:
    def ph(p):
        return "".join(p)

    doc: dict[str, Any] = {
        "name": model.name,
        "base_kv_ll": model.base_kv_ll,
        "horizon": {
            "dt_minutes": model.horizon.dt_minutes,
            "steps": model.horizon.steps,
            "start_label": model.horizon.start_label,
        },
        "buses": [{"id": b.id, "phases": ph(b.phases), "kind": b.kind} for b in model.buses],
        "lines": [
            {
                "id": ln.id,
                "from": ln.from_bus,
                "to": ln.to_bus,
                "phases": ph(ln.phases),
                "r_matrix": ln.r.tolist(),
                "x_matrix": ln.x.tolist(),
                "switch": ln.switch,
            }
            for ln in model.lines
        ],
        "loads": [
            {
                "id": ld.id,
                "bus": ld.bus,
                "phase": ld.phase,
                "switchable": ld.switchable,
                "pf_angle": ld.pf_angle,
                "profile": list(ld.profile),
            }
            for ld in model.loads
        ],
        "pvs": [
            {"id": p.id, "bus": p.bus, "phases": ph(p.phases), "rated_kw": p.rated_kw, "profile": list(p.profile)}
            for p in model.pvs
        ],
        "gfmis": [
            {
                "bus": bus,
                "s_rat_kva": g.s_rat,
                "c_kwh": g.c,
                "h": g.h,
                "d": g.d,
                "kf": g.kf,
                "kv": g.kv,
                "gamma": g.gamma,
                "t_lp": g.t_lp,
                "v_star": g.v_star,
                "f_star": g.f_star,
            }
            for bus, g in model.gfmis.items()
        ],
        "clpu": {"alpha1": model.clpu.alpha1, "alpha2": model.clpu.alpha2, "alpha3": model.clpu.alpha3},
    }
    if model.tg is not None:
        doc["tg"] = {"bus": model.tg.bus, "ss_rat_kva": model.tg.ss_rat, "recovery_step": model.tg.recovery_step}
    return doc


def dumps_feeder(model: FeederModel) -> str:
    return json.dumps(dump_feeder(model), indent=1)


def iter_block_buses(model: FeederModel, block_ids: Iterable[str]):
    for bid in block_ids:
        yield from model.block_map[bid].buses
