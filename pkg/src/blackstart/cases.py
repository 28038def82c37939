"""Ready-made feeders: small hand-checkable toys, seeded random toys, and an
approximate IEEE 123-bus layout.

Every builder returns a feeder *document* (the JSON-ready dict accepted by
:func:`blackstart.feeder.parse_feeder`), so cases can be tweaked before
parsing or written to disk as fixtures.
"""
from __future__ import annotations

import math

import numpy as np

# per-mile impedances (ohm) of typical overhead configurations
_Z3_R = [[0.4576, 0.1560, 0.1535], [0.1560, 0.4666, 0.1580], [0.1535, 0.1580, 0.4615]]
_Z3_X = [[1.0780, 0.5017, 0.3849], [0.5017, 1.0482, 0.4236], [0.3849, 0.4236, 1.0651]]
_Z2_R = [[1.3294, 0.2066], [0.2066, 1.3238]]
_Z2_X = [[1.3471, 0.4591], [0.4591, 1.3569]]
_Z1_R = [[1.3292]]
_Z1_X = [[1.3475]]

# VSG constants used throughout the examples (H, D, Kf, gamma)
VSG = {"h": 4.0, "d": 1.0, "kf": 89.0, "gamma": 0.093}


def _line(a, b, phases="abc", miles=0.05, switch=None):
    if switch:
        return {"from": str(a), "to": str(b), "phases": phases, "switch": switch}
    n = len(phases)
    r, x = {3: (_Z3_R, _Z3_X), 2: (_Z2_R, _Z2_X), 1: (_Z1_R, _Z1_X)}[n]
    return {
        "from": str(a), "to": str(b), "phases": phases,
        "r_matrix": [[v * miles for v in row] for row in r],
        "x_matrix": [[v * miles for v in row] for row in x],
    }


def _gfmi(bus, s_kva, c_kwh):
    return {"bus": str(bus), "s_rat_kva": float(s_kva), "c_kwh": float(c_kwh), **VSG}


def _flat(v, steps):
    return [float(v)] * steps


# ----------------------------------------------------------------------- toys


def toy_two_block(steps: int = 8) -> dict:
    """One GFMI block and one dead block behind an ESW."""
    return {
        "name": "toy-2block",
        "buses": [
            {"id": "1", "phases": "abc", "kind": "gfmi_root"},
            {"id": "2", "phases": "abc"},
            {"id": "3", "phases": "abc"},
        ],
        "lines": [_line(1, 2), _line(2, 3, switch="ESW")],
        "loads": [
            {"bus": "2", "phase": "a", "pf_angle": 0.3, "profile": _flat(20, steps)},
            {"bus": "3", "phase": "b", "pf_angle": 0.3, "profile": _flat(40, steps)},
        ],
        "gfmis": [_gfmi(1, 400, 200)],
        "horizon": {"dt_minutes": 15, "steps": steps},
    }


def toy_three_block(steps: int = 4) -> dict:
    """Two GFMI islands joined by an SSW, with a dead block off the weak one.

    The open block holds a big load that the right GFMI alone cannot sustain
    without breaching its RoCoF limit, so serving it early needs the islands
    to synchronize first.
    """
    return {
        "name": "toy-3block",
        "buses": [
            {"id": "1", "phases": "abc", "kind": "gfmi_root"},
            {"id": "2", "phases": "abc"},
            {"id": "3", "phases": "abc", "kind": "gfmi_root"},
            {"id": "4", "phases": "abc"},
            {"id": "5", "phases": "abc"},
        ],
        "lines": [
            _line(1, 2), _line(2, 3, switch="SSW"), _line(3, 4), _line(4, 5, switch="ESW"),
        ],
        "loads": [
            {"bus": "2", "phase": "a", "pf_angle": 0.3, "profile": _flat(30, steps)},
            {"bus": "4", "phase": "b", "pf_angle": 0.3, "profile": _flat(20, steps)},
            {"bus": "5", "phase": "c", "pf_angle": 0.3, "profile": _flat(90, steps)},
        ],
        "gfmis": [_gfmi(1, 600, 300), _gfmi(3, 200, 200)],
        "horizon": {"dt_minutes": 15, "steps": steps},
    }


def toy_three_block_tg(steps: int = 4, tg_recovery_step: int | None = 2) -> dict:
    """The three-block toy with a TG behind an SSW next to the strong GFMI.

    Under the benchmark rule the big load waits for both handovers, which
    cannot start before the TG returns, so the gap to the optimal setting
    widens as the TG comes back later.
    """
    doc = toy_three_block(steps)
    doc["name"] = "toy-3block-tg"
    doc["buses"].append({"id": "6", "phases": "abc", "kind": "tg_interconnect"})
    doc["lines"].append(_line(1, 6, switch="SSW"))
    doc["tg"] = {"bus": "6", "ss_rat_kva": 2000.0, "recovery_step": tg_recovery_step}
    return doc


def toy_four_block(steps: int = 4, tg_recovery_step: int | None = 2) -> dict:
    """Two GFMI islands, a dead middle block and a TG behind an SSW."""
    return {
        "name": "toy-4block",
        "buses": [
            {"id": "1", "phases": "abc", "kind": "gfmi_root"},
            {"id": "2", "phases": "abc"},
            {"id": "3", "phases": "abc"},
            {"id": "4", "phases": "abc"},
            {"id": "5", "phases": "abc", "kind": "gfmi_root"},
            {"id": "6", "phases": "abc"},
            {"id": "7", "phases": "abc", "kind": "tg_interconnect"},
        ],
        "lines": [
            _line(1, 2), _line(2, 3, switch="ESW"), _line(3, 4), _line(4, 5, switch="SSW"),
            _line(5, 6), _line(6, 7, switch="SSW"),
        ],
        "loads": [
            {"bus": "2", "phase": "a", "pf_angle": 0.3, "profile": _flat(30, steps)},
            {"bus": "4", "phase": "b", "pf_angle": 0.3, "profile": _flat(80, steps)},
            {"bus": "3", "phase": "c", "switchable": True, "pf_angle": 0.3, "profile": _flat(50, steps)},
            {"bus": "6", "phase": "a", "pf_angle": 0.3, "profile": _flat(35, steps)},
        ],
        "pvs": [{"bus": "3", "phases": "abc", "rated_kw": 30.0, "profile": _flat(20, steps)}],
        "gfmis": [_gfmi(1, 400, 150), _gfmi(5, 400, 100)],
        "tg": {"bus": "7", "ss_rat_kva": 2000.0, "recovery_step": tg_recovery_step},
        "horizon": {"dt_minutes": 15, "steps": steps},
    }


def count_binaries(doc: dict) -> int:
    """Declared binaries of the restoration model for ``doc``."""
    steps = doc["horizon"]["steps"]
    n_sw = sum(1 for ln in doc["lines"] if ln.get("switch"))
    n_sl = sum(1 for ld in doc.get("loads", []) if ld.get("switchable"))
    return steps * (n_sw + n_sl + len(doc.get("gfmis", [])))


def random_toy(seed: int, max_blocks: int = 4, max_steps: int = 8, max_binaries: int = 24) -> dict:
    """A random radial toy: a chain of at most ``max_blocks`` blocks.

    One or two blocks host a GFMI and the far end may host a TG.  Sizes keep
    the self-start pickup inside the default RoCoF band, so most draws have
    a feasible plan, but nothing is guaranteed beyond the binary budget.
    """
    rng = np.random.default_rng(seed)
    while True:
        n_blk = int(rng.integers(2, max_blocks + 1))
        has_tg = bool(rng.random() < 0.5) and n_blk >= 3
        n_g = 1 if n_blk == 2 else int(rng.integers(1, 3))
        steps = int(rng.integers(3, max_steps + 1))
        kinds = ["tg" if has_tg and k == n_blk - 1 else "plain" for k in range(n_blk)]
        free = [k for k in range(n_blk) if kinds[k] == "plain"]
        for k in sorted(rng.choice(free, size=min(n_g, len(free)), replace=False)):
            kinds[k] = "gfmi"
        if "gfmi" not in kinds:
            continue
        doc = _chain_doc(rng, kinds, steps, seed)
        if count_binaries(doc) <= max_binaries:
            return doc


def _chain_doc(rng, kinds, steps, seed) -> dict:
    buses, lines, loads, pvs, gfmis = [], [], [], [], []
    nb = 0
    prev_tail = None
    tg = None
    for k, kind in enumerate(kinds):
        size = 1 if kind == "tg" else int(rng.integers(1, 3))
        ids = [str(nb + i + 1) for i in range(size)]
        nb += size
        for i, b in enumerate(ids):
            bk = "plain"
            if i == 0 and kind == "gfmi":
                bk = "gfmi_root"
            elif kind == "tg":
                bk = "tg_interconnect"
            buses.append({"id": b, "phases": "abc", "kind": bk})
        for a, b in zip(ids, ids[1:]):
            lines.append(_line(a, b, miles=float(rng.uniform(0.02, 0.1))))
        if prev_tail is not None:
            sw = "SSW" if (kind != "plain" or kinds[k - 1] != "plain" or rng.random() < 0.3) else "ESW"
            lines.append(_line(prev_tail, ids[0], switch=sw))
        prev_tail = ids[-1]
        if kind == "gfmi":
            s = float(rng.choice([300.0, 400.0, 500.0]))
            gfmis.append(_gfmi(ids[0], s, float(rng.choice([60.0, 100.0, 150.0]))))
        if kind == "tg":
            tg = {"bus": ids[0], "ss_rat_kva": 2000.0, "recovery_step": int(rng.integers(1, steps + 1))}
            continue
        cap = 30.0 if kind == "gfmi" else 90.0
        for b in ids:
            if rng.random() < 0.8:
                ph = str(rng.choice(["a", "b", "c"]))
                sw = bool(rng.random() < 0.3) and kind != "gfmi"
                base = float(rng.uniform(5.0, cap / len(ids)))
                shape = [base * (1.0 + 0.1 * math.sin(0.7 * t + seed)) for t in range(steps)]
                loads.append({"bus": b, "phase": ph, "switchable": sw, "pf_angle": 0.3,
                              "profile": [round(v, 3) for v in shape]})
        if kind == "plain" and rng.random() < 0.4:
            pvs.append({"bus": ids[-1], "phases": "abc", "rated_kw": 30.0,
                        "profile": [round(float(rng.uniform(5, 25)), 3) for _ in range(steps)]})
    doc = {
        "name": f"random-toy-{seed}",
        "buses": buses, "lines": lines, "loads": loads, "pvs": pvs, "gfmis": gfmis,
        "horizon": {"dt_minutes": 15, "steps": steps},
    }
    if tg:
        doc["tg"] = tg
    return doc


# ------------------------------------------------------------- IEEE 123-bus

# (from, to, phases, feet); regulators and open ties are left out
_IEEE123_LINES = """
150 149 abc 400;149 1 abc 400;1 2 b 175;1 3 c 250;1 7 abc 300;3 4 c 200;3 5 c 325;5 6 c 250;
7 8 abc 200;8 12 b 225;8 9 a 225;8 13 abc 300;9 14 a 425;13 34 c 150;14 11 a 250;14 10 a 250;
15 16 c 375;15 17 c 350;18 19 a 250;18 21 abc 300;19 20 a 325;21 22 b 525;21 23 abc 250;
23 24 c 550;23 25 abc 275;25 26 ac 350;25 28 abc 200;26 27 ac 275;26 31 c 225;27 33 a 500;
28 29 abc 300;29 30 abc 350;30 250 abc 200;31 32 c 300;34 15 c 100;135 35 abc 375;35 36 ab 650;
35 40 abc 250;36 37 a 300;36 38 b 250;38 39 b 325;40 41 c 325;40 42 abc 250;42 43 b 500;
42 44 abc 200;44 45 a 200;44 47 abc 250;45 46 a 300;47 48 abc 150;47 49 abc 250;49 50 abc 250;
50 51 abc 250;51 151 abc 500;152 52 abc 400;52 53 abc 200;53 54 abc 125;54 55 abc 275;
54 57 abc 350;55 56 abc 275;57 58 b 250;57 60 abc 750;58 59 b 250;60 61 abc 550;60 62 abc 250;
62 63 abc 175;63 64 abc 350;64 65 abc 425;65 66 abc 325;160 67 abc 350;67 68 a 200;
67 97 abc 250;68 69 a 275;69 70 a 325;70 71 a 275;72 73 c 275;72 76 abc 200;73 74 c 350;
74 75 c 400;76 77 abc 400;77 78 abc 100;78 79 abc 225;78 80 abc 475;80 81 abc 475;81 82 abc 250;
81 84 c 675;82 83 abc 250;84 85 c 475;86 87 abc 450;87 88 a 175;87 89 abc 275;89 90 b 225;
89 91 abc 225;91 92 c 300;91 93 abc 225;93 94 a 275;93 95 abc 300;95 96 b 200;97 98 abc 275;
98 99 abc 550;99 100 abc 300;100 450 abc 800;197 101 abc 250;101 102 c 225;101 105 abc 275;
102 103 c 325;103 104 c 700;105 106 b 225;105 108 abc 325;106 107 b 575;108 109 a 450;
108 300 abc 1000;109 110 a 300;110 111 a 575;110 112 a 125;112 113 a 525;113 114 a 325
"""

# bus.phase kW (spot loads of the benchmark, delta loads put on their first phase)
_IEEE123_LOADS = """
1a40 2b20 4c40 5c20 6c40 7a20 9a40 10a20 11a40 12b20 16c40 17c20 19a40 20a40 22b40 24c40 28a40
29a40 30c40 31c20 32c20 33a40 34c40 35a40 37a40 38b20 39b20 41c20 42a20 43b40 45a20 46a20 47a35
47b35 47c35 48a70 48b70 48c70 49a35 49b70 49c35 50c40 51a20 52a40 53a40 55a20 56b20 58b20 59b20
60a20 62c40 63a40 64b75 65a35 65b35 65c70 66c75 68a20 69a40 70a20 71a40 73c40 74c40 75c40 76a105
76b70 76c70 77b40 79a40 80b40 82a40 83c20 84c20 85c40 86b20 87b40 88a40 90b40 92c40 94a40 95b20
96b20 98a40 99b40 100c40 102c20 103c40 104c40 106b40 107b40 109a40 111a20 112a20 113a40 114a20
"""

# bus phases kW; 965 kW in total
_IEEE123_PV = [("13", "abc", 150), ("57", "abc", 150), ("76", "abc", 150), ("97", "abc", 100),
               ("105", "abc", 100), ("44", "abc", 80), ("25", "abc", 75), ("10", "a", 40),
               ("65", "abc", 60), ("87", "abc", 60)]

_SWITCHES_2 = [("150r", "150", "SSW"), ("13", "152", "SSW"), ("13", "18", "ESW"), ("18", "135", "ESW"),
               ("60", "160", "ESW"), ("97", "197", "ESW"), ("76", "86", "ESW"), ("67", "72", "ESW"),
               ("51r", "51", "ESW"), ("89r", "89", "ESW")]
_SWITCHES_4 = [("150r", "150", "SSW"), ("13", "152", "ESW"), ("13", "18", "SSW"), ("18", "135", "SSW"),
               ("60", "160", "SSW"), ("97", "197", "SSW"), ("76", "86", "ESW"), ("67", "72", "ESW"),
               ("51r", "51", "ESW"), ("89r", "89", "ESW"), ("29r", "29", "ESW"), ("152r", "152", "ESW")]
_GFMI_2 = [("51r", 2450, 4600), ("89r", 2650, 3420)]
_GFMI_4 = [("51r", 1350, 2500), ("89r", 1500, 2350), ("29r", 950, 1170), ("152r", 1300, 2000)]


def daily_load_shape(steps: int, start_hour: float = 8.75, dt_h: float = 0.25) -> list[float]:
    """Smooth weekday shape in [0.7, 1.0]; illustrative, not measured."""
    out = []
    for k in range(steps):
        h = start_hour + k * dt_h
        out.append(0.85 + 0.15 * math.sin((h - 9.0) / 24.0 * 2 * math.pi))
    return out


def pv_shape(steps: int, start_hour: float = 8.75, dt_h: float = 0.25) -> list[float]:
    """Clear-sky bell between 6:00 and 19:00 peaking at 12:30."""
    out = []
    for k in range(steps):
        h = start_hour + k * dt_h
        out.append(max(0.0, math.sin((h - 6.0) / 13.0 * math.pi)) ** 1.5)
    return out


def ieee123(n_gfmi: int = 2, steps: int = 24, tg_recovery_step: int | None = 13,
            switchable_share: float = 0.4) -> dict:
    """Approximate IEEE 123-bus feeder split into bus-blocks by switches.

    Line lengths, phasing and spot loads follow the public benchmark; the
    switch placement, GFMI sites and ratings follow the 2- and 4-GFMI case
    studies.  Profiles are synthetic (the measured ones are not public).
    The default horizon starts at 8:45 in 15-minute steps, so step 13 is
    12:00.
    """
    if n_gfmi not in (2, 4):
        raise ValueError("n_gfmi must be 2 or 4")
    switches = _SWITCHES_2 if n_gfmi == 2 else _SWITCHES_4
    gfmi = _GFMI_2 if n_gfmi == 2 else _GFMI_4
    phases: dict[str, set] = {}
    lines = []
    for item in _IEEE123_LINES.replace("\n", "").split(";"):
        a, b, ph, ft = item.split()
        lines.append(_line(a, b, ph, miles=float(ft) / 5280.0))
        for bus in (a, b):
            phases.setdefault(bus, set()).update(ph)
    for a, b, kind in switches:
        lines.append(_line(a, b, "abc", switch=kind))
        for bus in (a, b):
            phases.setdefault(bus, set()).update("abc")
    gf_buses = {g for g, _, _ in gfmi}
    buses = []
    for bus in sorted(phases, key=lambda s: (int("".join(c for c in s if c.isdigit())), s)):
        kind = "gfmi_root" if bus in gf_buses else ("tg_interconnect" if bus == "150r" else "plain")
        buses.append({"id": bus, "phases": "".join(sorted(phases[bus])), "kind": kind})
    shape = daily_load_shape(steps)
    spots = []
    for tok in _IEEE123_LOADS.split():
        i = next(j for j, c in enumerate(tok) if c.isalpha())
        spots.append((tok[:i], tok[i], float(tok[i + 1:])))
    # every k-th load bus is switchable, spread evenly along the feeder
    load_buses = list(dict.fromkeys(b for b, _, _ in spots))
    switchable = {b for k, b in enumerate(load_buses)
                  if math.floor((k + 1) * switchable_share) > math.floor(k * switchable_share)}
    loads = [{"bus": bus, "phase": ph, "pf_angle": round(math.acos(0.9), 6),
              "switchable": bus in switchable and bus not in gf_buses,
              "profile": [round(kw * s, 4) for s in shape]} for bus, ph, kw in spots]
    ps = pv_shape(steps)
    pvs = [{"bus": b, "phases": ph, "rated_kw": float(kw), "profile": [round(kw * s, 4) for s in ps]}
           for b, ph, kw in _IEEE123_PV]
    return {
        "name": f"ieee123-{n_gfmi}gfmi",
        "base_kv_ll": 4.16,
        "buses": buses,
        "lines": lines,
        "loads": loads,
        "pvs": pvs,
        "gfmis": [_gfmi(b, s, c) for b, s, c in gfmi],
        "tg": {"bus": "150r", "ss_rat_kva": 5000.0, "recovery_step": tg_recovery_step},
        "horizon": {"dt_minutes": 15, "steps": steps, "start_label": "08:45"},
    }


BUILTIN = {
    "toy2": toy_two_block,
    "toy3": toy_three_block,
    "toy3tg": toy_three_block_tg,
    "toy4": toy_four_block,
    "ieee123": ieee123,
    "ieee123-4": lambda: ieee123(n_gfmi=4),
}


def builtin(name: str) -> dict:
    try:
        return BUILTIN[name]()
    except KeyError:
        raise KeyError(f"unknown built-in feeder {name!r}; choose from {sorted(BUILTIN)}") from None
