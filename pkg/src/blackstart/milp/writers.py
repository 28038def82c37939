"""Deterministic LP (CPLEX text) and fixed-field MPS emitters."""
from __future__ import annotations

import math
import re

from .ir import EQ, QLE, ModelError, ModelIR

_LP_BAD = re.compile(r"[^A-Za-z0-9_!\"#$%&()/,.;?@`'{}|~]")


def lp_name(name: str) -> str:
    """Map an arbitrary id onto the LP-format name alphabet."""
    s = _LP_BAD.sub("_", name)
    if not s or s[0].isdigit() or s[0] in ".eE":
        s = "_" + s
    return s[:255]


def name_map(model: ModelIR) -> dict[str, str]:
    """Original variable id -> emitted LP name; collisions are an error."""
    out, seen = {}, {}
    for vid in model.vars:
        n = lp_name(vid)
        if n in seen:
            raise ModelError(f"name collision: {vid!r} and {seen[n]!r} both map to {n!r}")
        seen[n] = vid
        out[vid] = n
    return out


def _num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _lin(terms, names) -> str:
    parts = []
    for k, a in terms.items():
        sign = "-" if a < 0 else "+"
        mag = abs(a)
        coef = "" if mag == 1.0 else _num(mag) + " "
        parts.append(f"{sign} {coef}{names[k]}")
    if not parts:
        return "0 " + next(iter(names.values()), "x") if names else "0"
    s = " ".join(parts)
    return s[2:] if s.startswith("+ ") else s


def _wrap(text: str, width: int = 200) -> list[str]:
    # LP readers reject very long lines; break between terms
    out, line = [], ""
    for tok in text.split(" "):
        if len(line) + len(tok) + 1 > width and line:
            out.append(line)
            line = "  " + tok
        else:
            line = f"{line} {tok}" if line else tok
    out.append(line)
    return out


def emit_lp(model: ModelIR) -> str:
    model.validate()
    names = name_map(model)
    rows = []
    rows.append(f"\\ Problem: {model.name}")
    rows.append("Maximize" if model.sense == "max" else "Minimize")
    if model.objective:
        rows.extend(_wrap(" obj: " + _lin(model.objective, names)))
    elif model.vars:
        rows.append(f" obj: 0 {next(iter(names.values()))}")
    else:
        rows.append(" obj:")
    rows.append("Subject To")
    seen_rows = set()
    for i, c in enumerate(model.constraints):
        rn = lp_name(c.tag)
        if rn in seen_rows:
            raise ModelError(f"row name collision on {c.tag!r}")
        seen_rows.add(rn)
        body = _lin(c.terms, names) if c.terms else ""
        if c.kind == QLE:
            sq = " + ".join(
                (f"{_num(w)} " if w != 1.0 else "") + f"{names[a]} ^ 2" for (a, _), w in c.quad.items()
            )
            body = (body + " + " if body else "") + f"[ {sq} ]"
        if not body:
            body = "0 " + next(iter(names.values()))
        op = "=" if c.kind == EQ else "<="
        rows.extend(_wrap(f" {rn}: {body} {op} {_num(c.rhs)}"))
    rows.append("Bounds")
    for vid, v in model.vars.items():
        n = names[vid]
        if v.is_binary and v.lb == 0 and v.ub == 1:
            continue
        lb, ub = v.lb, v.ub
        if lb == -math.inf and ub == math.inf:
            rows.append(f" {n} free")
        elif lb == ub:
            rows.append(f" {n} = {_num(lb)}")
        else:
            lo = "-inf" if lb == -math.inf else _num(lb)
            hi = "+inf" if ub == math.inf else _num(ub)
            rows.append(f" {lo} <= {n} <= {hi}")
    bins = [names[v] for v in model.binaries]
    if bins:
        rows.append("Binaries")
        rows.extend(_wrap(" " + " ".join(bins)))
    rows.append("End")
    return "\n".join(rows) + "\n"


def _mps_names(model: ModelIR) -> tuple[dict[str, str], dict[str, str], bool]:
    names = name_map(model)
    short = all(len(n) <= 8 for n in names.values()) and all(
        len(lp_name(c.tag)) <= 8 for c in model.constraints
    )
    if short:
        cols = names
        rows = {c.tag: lp_name(c.tag) for c in model.constraints}
        if len(set(rows.values())) != len(rows):
            raise ModelError("row name collision in MPS output")
    else:
        cols = {vid: f"C{k:07d}" for k, vid in enumerate(model.vars)}
        rows = {c.tag: f"R{k:07d}" for k, c in enumerate(model.constraints)}
    return cols, rows, not short


def _f(field: str, width: int) -> str:
    return field.ljust(width)


def _mps_num(x: float) -> str:
    s = f"{x:.12g}"
    if len(s) > 12:
        s = f"{x:.6e}"
    return s


def _marker(k: int, kind: str) -> str:
    # fields at columns 5, 15 and 40
    return "    " + f"M{k:07d}".ljust(10) + "'MARKER'".ljust(25) + f"'{kind}'"


def emit_mps(model: ModelIR) -> str:
    """Fixed-field MPS; long names are replaced by ``Cnnnnnnn``/``Rnnnnnnn``
    with the mapping recorded in comment lines."""
    model.validate()
    if model.has_quadratic:
        raise ModelError("MPS output does not support quadratic constraints; use emit_lp or polygon mode")
    cols, rows, mapped = _mps_names(model)
    out = []
    if mapped:
        for vid, n in cols.items():
            out.append(f"* {n} = {vid}")
        for tag, n in rows.items():
            out.append(f"* {n} = {tag}")
    out.append(_f("NAME", 14) + model.name[:8])
    if model.sense == "max" and model.objective:
        out.append("OBJSENSE")
        out.append("    MAX")
    out.append("ROWS")
    out.append(" N  OBJ")
    for c in model.constraints:
        out.append(f" {'E' if c.kind == EQ else 'L'}  {rows[c.tag]}")
    col_entries: dict[str, list[tuple[str, float]]] = {vid: [] for vid in model.vars}
    for vid, a in model.objective.items():
        col_entries[vid].append(("OBJ", a))
    for c in model.constraints:
        for vid, a in c.terms.items():
            col_entries[vid].append((rows[c.tag], a))
    if model.vars:
        out.append("COLUMNS")
    in_int = False
    marker = 0
    for vid, v in model.vars.items():
        if v.is_binary and not in_int:
            out.append(_marker(marker, "INTORG"))
            in_int = True
            marker += 1
        elif not v.is_binary and in_int:
            out.append(_marker(marker, "INTEND"))
            in_int = False
        entries = col_entries[vid] or [("OBJ", 0.0)]
        for rn, a in entries:
            out.append(f"    {_f(cols[vid], 8)}  {_f(rn, 8)}  {_mps_num(a):>12}")
    if in_int:
        out.append(_marker(marker, "INTEND"))
    rhs = [(rows[c.tag], c.rhs) for c in model.constraints if c.rhs != 0.0]
    if model.constraints:
        out.append("RHS")
    for rn, b in rhs:
        out.append(f"    {_f('RHS', 8)}  {_f(rn, 8)}  {_mps_num(b):>12}")
    bounds = []
    for vid, v in model.vars.items():
        n = cols[vid]
        lb, ub = v.lb, v.ub
        if lb == ub:
            bounds.append(("FX", n, lb))
            continue
        if lb == -math.inf and ub == math.inf:
            bounds.append(("FR", n, None))
            continue
        if lb == -math.inf:
            bounds.append(("MI", n, None))
        elif lb != 0.0:
            bounds.append(("LO", n, lb))
        if ub != math.inf:
            bounds.append(("UP", n, ub))
    if bounds:
        out.append("BOUNDS")
        for kind, n, val in bounds:
            line = f" {kind} {_f('BND', 8)}  {_f(n, 8)}"
            if val is not None:
                line += f"  {_mps_num(val):>12}"
            out.append(line)
    out.append("ENDATA")
    return "\n".join(out) + "\n"
