"""Solver back ends: embedded exhaustive enumeration and external command."""
from __future__ import annotations

import heapq
import importlib.util
import math
import os
import platform
import shlex
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .ir import CONTINUOUS, EQ, FEAS_TOL, QLE, LinExpr, ModelError, ModelIR, Solution
from .simplex import solve_lp
from .writers import emit_lp, name_map

MAX_EXHAUSTIVE_BINARIES = 24


class ExhaustiveLimitError(ModelError):
    """Too many free binaries for complete enumeration."""


# --------------------------------------------------------------- compiled form


class Compiled:
    """Matrix view of a :class:`ModelIR` with objective as minimisation."""

    def __init__(self, model: ModelIR):
        model.validate()
        self.model = model
        self.ids = list(model.vars)
        self.index = {v: k for k, v in enumerate(self.ids)}
        n = len(self.ids)
        decl = model.vars.values()
        self.lb = np.array([v.lb for v in decl], float)
        self.ub = np.array([v.ub for v in decl], float)
        self.is_bin = np.array([v.is_binary for v in decl], bool)
        sign = -1.0 if model.sense == "max" else 1.0
        self.c = np.zeros(n)
        for k, a in model.objective.items():
            self.c[self.index[k]] = sign * a
        rows, cols, vals, rhs, eq, tags = [], [], [], [], [], []
        self.quad = []
        for c in model.constraints:
            if c.kind == QLE:
                lin = {self.index[k]: a for k, a in c.terms.items()}
                qd = {self.index[a]: w for (a, _), w in c.quad.items()}
                self.quad.append((lin, qd, c.rhs, c.tag))
                continue
            r = len(rhs)
            for k, a in c.terms.items():
                rows.append(r)
                cols.append(self.index[k])
                vals.append(a)
            rhs.append(c.rhs)
            eq.append(c.kind == EQ)
            tags.append(c.tag)
        m = len(rhs)
        self.A = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
        self.b = np.array(rhs, float)
        self.is_eq = np.array(eq, bool)
        self.tags = tags
        # quadratic rows without linear part bound each variable by sqrt(rhs/w)
        for lin, qd, rhs_q, _ in self.quad:
            if not lin and rhs_q >= 0:
                for k, w in qd.items():
                    r = math.sqrt(rhs_q / w)
                    self.lb[k] = max(self.lb[k], -r)
                    self.ub[k] = min(self.ub[k], r)
        # stacked G x <= h for propagation
        G = sp.vstack([self.A, -self.A[self.is_eq]]).tocoo()
        self.h = np.concatenate([self.b, -self.b[self.is_eq]])
        self.g_row, self.g_col, self.g_val = G.row, G.col, G.data
        self.mg = G.shape[0]
        self.g_tags = tags + [t for t, e in zip(tags, eq) if e]
        self.conflict: str | None = None  # row that made the last propagation fail

    # ------------------------------------------------------------ propagation
    def propagate(self, lb: np.ndarray, ub: np.ndarray, max_rounds: int = 40) -> bool:
        """Activity-based bound tightening in place; False when infeasible."""
        r, j, a, h = self.g_row, self.g_col, self.g_val, self.h
        if r.size == 0:
            return bool(np.all(lb <= ub + FEAS_TOL))
        pos = a > 0
        for _ in range(max_rounds):
            with np.errstate(invalid="ignore"):
                contrib = np.where(pos, a * lb[j], a * ub[j])
            inf_c = ~np.isfinite(contrib)
            fin = np.where(inf_c, 0.0, contrib)
            minact = np.bincount(r, fin, self.mg)
            ninf = np.bincount(r, inf_c.astype(float), self.mg)
            slack_tol = FEAS_TOL * (1.0 + np.abs(h))
            bad = (ninf == 0) & (minact > h + slack_tol)
            if bad.any():
                self.conflict = self.g_tags[int(np.flatnonzero(bad)[0])]
                return False
            resid = minact[r] - fin
            ok = (ninf[r] - inf_c) == 0
            with np.errstate(divide="ignore", invalid="ignore"):
                bnd = (h[r] - resid) / a
            new_ub = np.full(lb.size, np.inf)
            new_lb = np.full(lb.size, -np.inf)
            sel = ok & pos
            np.minimum.at(new_ub, j[sel], bnd[sel])
            sel = ok & ~pos
            np.maximum.at(new_lb, j[sel], bnd[sel])
            ib = self.is_bin
            new_ub[ib] = np.floor(new_ub[ib] + 1e-6)
            new_lb[ib] = np.ceil(new_lb[ib] - 1e-6)
            # continuous bounds are only tightened noticeably, and loosened
            # slightly so that pruning never cuts a tolerance-feasible point
            cont = ~ib
            pad_u = new_ub + 1e-7 * (1.0 + np.abs(new_ub))
            pad_l = new_lb - 1e-7 * (1.0 + np.abs(new_lb))
            new_ub = np.where(cont, pad_u, new_ub)
            new_lb = np.where(cont, pad_l, new_lb)
            gain_u = ub - new_ub
            gain_l = new_lb - lb
            # relative to the new bound so infinite bounds can tighten
            thr = np.where(ib, 0.5, 1e-5 * (1.0 + np.abs(new_ub)))
            tu = (gain_u > thr) & np.isfinite(new_ub)
            thr = np.where(ib, 0.5, 1e-5 * (1.0 + np.abs(new_lb)))
            tl = (gain_l > thr) & np.isfinite(new_lb)
            if not (tu.any() or tl.any()):
                return True
            ub[tu] = new_ub[tu]
            lb[tl] = new_lb[tl]
            crossed = lb > ub + FEAS_TOL * (1.0 + np.abs(ub))
            if crossed.any():
                self.conflict = self._culprit(int(np.flatnonzero(crossed)[0]), j, r, ok, pos, bnd, tu[int(np.flatnonzero(crossed)[0])])
                return False
            # keep near-crossing continuous bounds consistent
            cross = lb > ub
            mid = 0.5 * (lb + ub)
            lb[cross] = mid[cross]
            ub[cross] = mid[cross]
        return True

    def _culprit(self, k, j, r, ok, pos, bnd, from_upper) -> str:
        # the row whose implied bound on column k was tightest
        sel = np.flatnonzero((j == k) & ok & (pos if from_upper else ~pos))
        if sel.size == 0:
            return f"bound:{self.ids[k]}"
        e = sel[np.argmin(bnd[sel])] if from_upper else sel[np.argmax(bnd[sel])]
        return self.g_tags[int(r[e])]

    # ---------------------------------------------------------------- leaf LP
    def solve_box(self, lb, ub, quad_tol: float = 1e-7, max_rounds: int = 40):
        """Solve the LP relaxation of the box, quadratic rows included.

        Two-variable disks are first replaced by an inscribed polygon: any
        point found that way is truly feasible, and it is optimal whenever
        it reaches the box bound (the usual case once binaries are fixed).
        Otherwise the disks are circumscribed and refined with tangent cuts.
        """
        if not self.quad:
            return self._solve_linear(lb, ub, [])
        disks = [q for q in self.quad if not q[0] and len(q[1]) == 2 and q[2] > 0]
        inner = None
        if disks:
            st, x, ok = self._cut_loop(lb, ub, _polygons(disks, 64, inner=True), quad_tol, max_rounds)
            if st == "optimal" and ok:
                if -self.c @ x >= _bound(self, lb, ub) - 1e-6 * (1.0 + abs(-self.c @ x)):
                    return st, x
                inner = x
        st, x, ok = self._cut_loop(lb, ub, _polygons(disks, 64, inner=False), quad_tol, max_rounds)
        if st != "optimal" or ok:
            return st, x
        if inner is not None and -self.c @ inner >= -self.c @ x - 1e-9 * (1.0 + abs(-self.c @ x)):
            return "optimal", inner
        if disks:
            # fine inscribed polygons only where the relaxed point sticks out;
            # a dense tableau cannot afford thousands of rows per disk
            viol = [q for q in disks if self._violation(q, x) > quad_tol * max(1.0, abs(q[2]))]
            rest = [q for q in disks if self._violation(q, x) <= quad_tol * max(1.0, abs(q[2]))]
            n_fine = min(4096, max(256, 4096 // max(1, len(viol))))
            cuts = _polygons(viol, n_fine, inner=True) + _polygons(rest, 64, inner=False)
            st2, x2, ok2 = self._cut_loop(lb, ub, cuts, quad_tol, max_rounds)
            if st2 == "optimal" and ok2:
                return st2, x2
        if self._worst(x) <= 1e-5:
            return "optimal", x
        return "error", None

    @staticmethod
    def _violation(row, x) -> float:
        lin, qd, rhs, _ = row
        return sum(w * x[k] ** 2 for k, w in qd.items()) + sum(a * x[k] for k, a in lin.items()) - rhs

    def _worst(self, x) -> float:
        """Largest relative violation of a quadratic row."""
        worst = 0.0
        for lin, qd, rhs, _ in self.quad:
            g = sum(w * x[k] ** 2 for k, w in qd.items()) + sum(a * x[k] for k, a in lin.items())
            worst = max(worst, (g - rhs) / max(1.0, abs(rhs)))
        return worst

    def _cut_loop(self, lb, ub, cuts, quad_tol, max_rounds):
        cuts = list(cuts)
        for _ in range(max_rounds):
            status, x = self._solve_linear(lb, ub, cuts)
            if status != "optimal":
                return status, x, False
            added = False
            for lin, qd, rhs, _ in self.quad:
                sq = sum(w * x[k] ** 2 for k, w in qd.items())
                viol = sq + sum(a * x[k] for k, a in lin.items()) - rhs
                if viol <= quad_tol * max(1.0, abs(rhs)):
                    continue
                if not lin and rhs > 0:
                    # tangent at the radial projection onto the boundary
                    s = math.sqrt(rhs / sq)
                    cuts.append(({k: 2 * w * x[k] * s for k, w in qd.items()}, 2 * rhs))
                else:
                    cut = {k: 2 * w * x[k] for k, w in qd.items()}
                    for k, a in lin.items():
                        cut[k] = cut.get(k, 0.0) + a
                    cuts.append((cut, rhs + sq))
                added = True
            if not added:
                return "optimal", x, True
        return "optimal", x, False

    def _solve_linear(self, lb, ub, cuts):
        n = lb.size
        A, b, is_eq = self.A, self.b, self.is_eq
        if cuts:
            rows, cols, vals = [], [], []
            for r, (cut, _) in enumerate(cuts):
                for k, a in cut.items():
                    rows.append(r)
                    cols.append(k)
                    vals.append(a)
            C = sp.csr_matrix((vals, (rows, cols)), shape=(len(cuts), n))
            A = sp.vstack([A, C]).tocsr()
            b = np.concatenate([b, [h for _, h in cuts]])
            is_eq = np.concatenate([is_eq, np.zeros(len(cuts), bool)])
        return _presolved_lp(self.c, A, b, is_eq, lb.copy(), ub.copy())


def _polygons(disks, n: int, inner: bool) -> list[tuple[dict, float]]:
    """Polygon rows for two-variable disks ``w1 x^2 + w2 y^2 <= r``.

    ``inner`` gives the inscribed polygon (a restriction), otherwise the
    circumscribed one (a relaxation).
    """
    out = []
    shrink = math.cos(math.pi / n) if inner else 1.0
    for _, qd, rhs, _ in disks:
        (a, wa), (b, wb) = qd.items()
        ra, rb = math.sqrt(rhs / wa), math.sqrt(rhs / wb)
        for i in range(n):
            th = 2 * math.pi * (i + (0.5 if inner else 0.0)) / n
            out.append(({a: math.cos(th) / ra, b: math.sin(th) / rb}, shrink))
    return out


def _presolved_lp(c, A, b, is_eq, lb, ub):
    """Substitute fixed columns, turn singleton rows into bounds, then simplex."""
    n = lb.size
    x = np.zeros(n)
    fixed = np.zeros(n, bool)
    active = np.ones(A.shape[0], bool)
    A = A.tocsr()
    for _ in range(50):
        newly = (~fixed) & (ub - lb <= 1e-12)
        if newly.any():
            x[newly] = np.where(np.isfinite(lb[newly]), lb[newly], ub[newly])
            fixed |= newly
        free = ~fixed
        resid = b - A[:, fixed] @ x[fixed]
        Af = A[:, free]
        nnz = np.diff(Af.tocsr().indptr)
        empty = active & (nnz == 0)
        if empty.any():
            r = resid[empty]
            e = is_eq[empty]
            tol = FEAS_TOL * (1.0 + np.abs(r))
            if np.any(e & (np.abs(r) > tol)) or np.any(~e & (r < -tol)):
                return "infeasible", None
            active &= ~empty
        # inequality rows that cannot bind over the current box
        lo_f, hi_f = lb[free], ub[free]
        pos = Af.multiply(Af > 0).tocsr()
        neg = Af.multiply(Af < 0).tocsr()
        with np.errstate(invalid="ignore"):
            top = pos @ np.where(np.isfinite(hi_f), hi_f, 1e30) + neg @ np.where(np.isfinite(lo_f), lo_f, -1e30)
        slackish = active & ~is_eq & (top <= resid - FEAS_TOL * (1.0 + np.abs(resid))) & (top < 1e29)
        active &= ~slackish
        single = active & (nnz == 1)
        if not single.any():
            break
        changed = False
        Afc = Af.tocsr()
        free_idx = np.flatnonzero(free)
        for r in np.flatnonzero(single):
            k = Afc.indptr[r]
            j = free_idx[Afc.indices[k]]
            a = Afc.data[k]
            v = resid[r] / a
            if is_eq[r]:
                if v < lb[j] - FEAS_TOL * (1 + abs(v)) or v > ub[j] + FEAS_TOL * (1 + abs(v)):
                    return "infeasible", None
                lb[j] = ub[j] = min(max(v, lb[j]), ub[j])
            elif a > 0:
                ub[j] = min(ub[j], v)
            else:
                lb[j] = max(lb[j], v)
            if lb[j] > ub[j]:
                if lb[j] - ub[j] > FEAS_TOL * (1 + abs(ub[j])):
                    return "infeasible", None
                lb[j] = ub[j]
            active[r] = False
            changed = True
        if not changed:
            break
    free = ~fixed
    free_idx = np.flatnonzero(free)
    rows = np.flatnonzero(active)
    resid = b - A[:, fixed] @ x[fixed]
    sub = A[rows][:, free_idx].toarray() if rows.size and free_idx.size else np.zeros((rows.size, free_idx.size))
    bb = resid[rows]
    eqm = is_eq[rows]
    # columns in no active row sit at their best bound
    used = np.abs(sub).sum(axis=0) > 0 if rows.size else np.zeros(free_idx.size, bool)
    for k in np.flatnonzero(~used):
        j = free_idx[k]
        cj = c[j]
        if cj > 0:
            val = lb[j]
        elif cj < 0:
            val = ub[j]
        else:
            val = lb[j] if np.isfinite(lb[j]) else (ub[j] if np.isfinite(ub[j]) else 0.0)
        if not np.isfinite(val):
            return "unbounded", None
        x[j] = val
    keep = np.flatnonzero(used)
    if keep.size:
        cols = free_idx[keep]
        S = sub[:, keep]
        res = solve_lp(c[cols], S[~eqm], bb[~eqm], S[eqm], bb[eqm], lb[cols], ub[cols])
        if res.status != "optimal":
            return res.status, None
        x[cols] = res.x
    elif rows.size:
        tol = FEAS_TOL * (1 + np.abs(bb))
        if np.any(eqm & (np.abs(bb) > tol)) or np.any(~eqm & (bb < -tol)):
            return "infeasible", None
    return "optimal", x


# ------------------------------------------------------------- exhaustive


@dataclass
class ExhaustiveStats:
    nodes: int = 0
    leaves: int = 0
    free_binaries: int = 0


def solve_exhaustive(
    model: ModelIR,
    max_binaries: int = MAX_EXHAUSTIVE_BINARIES,
    max_leaves: int | None = None,
) -> Solution:
    """Complete enumeration of the binary assignments with bound pruning.

    Partial assignments are pruned when activity propagation proves them
    infeasible or when their objective bound cannot beat the incumbent, so
    the result is the global optimum.  Nodes are explored best bound first,
    deeper first on ties, then 0-before-1, which makes the reported optimum
    deterministic.
    """
    comp = Compiled(model)
    lb, ub = comp.lb.copy(), comp.ub.copy()
    stats = ExhaustiveStats()
    if not comp.propagate(lb, ub):
        return Solution("infeasible", message=f"bound propagation proves infeasibility at row {comp.conflict}",
                        diagnostics={**vars(stats), "conflict": comp.conflict})
    bins = np.flatnonzero(comp.is_bin)
    free = [int(k) for k in bins if lb[k] < ub[k]]
    stats.free_binaries = len(free)
    if len(free) > max_binaries:
        raise ExhaustiveLimitError(
            f"exhaustive backend limited to {max_binaries} free binaries, model has {len(free)}"
        )
    best_val, best_x = -math.inf, None
    heap = []

    def push(lo, hi, path):
        bnd = _bound(comp, lo, hi)
        q = -round(bnd, 6) if math.isfinite(bnd) else -math.inf
        heapq.heappush(heap, (q, -len(path), path, lo, hi))

    push(lb, ub, ())
    capped = False
    while heap:
        q, _, path, lo, hi = heapq.heappop(heap)
        bnd = -q
        if best_x is not None and bnd <= best_val + 1e-9 * max(1.0, abs(best_val)):
            break
        stats.nodes += 1
        nxt = next((k for k in free if lo[k] < hi[k]), None)
        if nxt is None:
            stats.leaves += 1
            status, x = comp.solve_box(lo, hi)
            if status == "optimal":
                val = -float(comp.c @ x)
                if val > best_val + 1e-9 * max(1.0, abs(best_val)) or best_x is None:
                    best_val, best_x = val, x
            if max_leaves is not None and stats.leaves >= max_leaves:
                capped = True
                break
            continue
        for v in (0.0, 1.0):
            l2, h2 = lo.copy(), hi.copy()
            l2[nxt] = h2[nxt] = v
            if comp.propagate(l2, h2):
                push(l2, h2, path + (int(v),))
    if best_x is None:
        return Solution("infeasible", message="no binary assignment admits a feasible LP", diagnostics=vars(stats))
    values = {vid: float(best_x[k]) for k, vid in enumerate(comp.ids)}
    for k in bins:
        values[comp.ids[k]] = float(round(best_x[k]))
    obj = model.objective_value(values)
    return Solution("feasible" if capped else "optimal", values, obj, diagnostics=vars(stats))


def _bound(comp: Compiled, lo, hi) -> float:
    """Bound on the value ``-c@x`` (larger is better) over the box."""
    with np.errstate(invalid="ignore"):
        v = np.where(-comp.c > 0, -comp.c * hi, -comp.c * lo)
    v = np.where(comp.c == 0, 0.0, v)
    return float(v.sum())


# ------------------------------------------------------------- external


def find_cbc() -> str | None:
    """Locate a CBC executable: $BLACKSTART_CBC, PATH, or a pulp-bundled copy."""
    env = os.environ.get("BLACKSTART_CBC")
    if env and Path(env).exists():
        return env
    found = shutil.which("cbc")
    if found:
        return found
    spec = importlib.util.find_spec("pulp")
    if spec and spec.origin:
        pref = {"x86_64": "i64", "amd64": "i64", "aarch64": "arm64", "arm64": "arm64"}.get(platform.machine().lower(), "")
        cands = sorted(Path(spec.origin).parent.glob("solverdir/cbc/*/*/cbc"), key=lambda p: (p.parent.name != pref, str(p)))
        for cand in cands:
            if os.access(cand, os.X_OK) and _runs(str(cand)):
                return str(cand)
    return None


def _runs(exe: str) -> bool:
    # bundled binaries exist for several architectures; keep the one that executes
    try:
        subprocess.run([exe, "-quit"], capture_output=True, timeout=20)
    except (OSError, subprocess.TimeoutExpired):
        return False
    return True


def cbc_template(path: str | None = None) -> str | None:
    exe = path or find_cbc()
    if exe is None:
        return None
    return f"{shlex.quote(exe)} {{model}} solve solu {{solution}}"


def parse_solution_text(text: str, names: dict[str, str]) -> tuple[str, dict[str, float]]:
    """Read ``name value`` lines (or CBC's ``index name value reduced``)."""
    inverse = {v: k for k, v in names.items()}
    lines = [ln for ln in text.splitlines() if ln.strip()]
    status = "optimal"
    first = lines[0].lower() if lines else ""
    body = lines
    if first and not _looks_like_pair(lines[0], inverse):
        body = lines[1:]
        if "infeasible" in first:
            status = "infeasible"
        elif "unbounded" in first:
            status = "unbounded"
        elif first.startswith("optimal"):
            status = "optimal"
        elif "stopped" in first or "feasible" in first:
            status = "feasible"
        else:
            status = "error"
    values = {}
    for ln in body:
        tok = ln.replace("**", " ").split()
        if len(tok) >= 3 and tok[0].isdigit() and tok[1] in inverse:
            name, val = tok[1], tok[2]
        elif len(tok) >= 2:
            name, val = tok[0], tok[1]
        else:
            raise ValueError(f"cannot parse solution line {ln!r}")
        if name not in inverse:
            raise ValueError(f"unknown variable {name!r} in solution file")
        values[inverse[name]] = float(val)
    return status, values


def _looks_like_pair(line: str, inverse) -> bool:
    tok = line.split()
    return (len(tok) == 2 and tok[0] in inverse) or (len(tok) >= 3 and tok[0].isdigit() and tok[1] in inverse)


def solve_external(model: ModelIR, command_template: str, timeout: float = 600.0, workdir: str | None = None) -> Solution:
    """Write the LP file, run ``command_template`` and parse its solution file.

    Variables absent from the solution file are read as 0 (CBC omits them).
    """
    names = name_map(model)
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        lp_path = Path(tmp) / "model.lp"
        sol_path = Path(tmp) / "model.sol"
        lp_path.write_text(emit_lp(model))
        cmd = command_template.format(model=shlex.quote(str(lp_path)), solution=shlex.quote(str(sol_path)))
        diag = {"command": cmd}
        try:
            proc = subprocess.run(shlex.split(cmd), capture_output=True, text=True, timeout=timeout)
        except FileNotFoundError as exc:
            return Solution("error", message=f"solver executable not found: {exc}", diagnostics=diag)
        except subprocess.TimeoutExpired as exc:
            diag["stdout"] = exc.stdout or ""
            return Solution("error", message=f"solver timed out after {timeout:g} s", diagnostics=diag)
        diag.update(stdout=proc.stdout[-4000:], stderr=proc.stderr[-4000:], returncode=proc.returncode)
        if not sol_path.exists():
            return Solution("error", message="solver produced no solution file", diagnostics=diag)
        try:
            status, values = parse_solution_text(sol_path.read_text(), names)
        except ValueError as exc:
            return Solution("error", message=f"solution parse failure: {exc}", diagnostics=diag)
    if status in ("infeasible", "unbounded", "error"):
        return Solution(status, message=f"external solver reported {status}", diagnostics=diag)
    full = {vid: values.get(vid, 0.0) for vid in model.vars}
    for vid in model.binaries:
        full[vid] = float(round(full[vid]))
    return Solution(status, full, model.objective_value(full), diagnostics=diag)


# ------------------------------------------------------------- dispatch


@dataclass(frozen=True)
class Backend:
    kind: str  # exhaustive | external
    command: str = ""
    max_binaries: int = MAX_EXHAUSTIVE_BINARIES
    timeout: float = 600.0

    @staticmethod
    def parse(spec: str) -> "Backend":
        """``exhaustive``, ``cbc`` or ``external:<command template>``."""
        if spec == "exhaustive":
            return Backend("exhaustive")
        if spec == "cbc":
            tpl = cbc_template()
            if tpl is None:
                raise ModelError("no CBC executable found (set BLACKSTART_CBC)")
            return Backend("external", tpl)
        if spec.startswith("external:"):
            tpl = spec[len("external:"):]
            if "{model}" not in tpl or "{solution}" not in tpl:
                raise ModelError("external command template needs {model} and {solution} placeholders")
            return Backend("external", tpl)
        raise ModelError(f"unknown backend {spec!r}")


def solve(model: ModelIR, backend: Backend | str = "exhaustive", **kw) -> Solution:
    if isinstance(backend, str):
        backend = Backend.parse(backend)
    if backend.kind == "exhaustive":
        return solve_exhaustive(model, max_binaries=kw.get("max_binaries", backend.max_binaries), max_leaves=kw.get("max_leaves"))
    return solve_external(model, backend.command, timeout=kw.get("timeout", backend.timeout))


# ------------------------------------------------------------- diagnostics


def elastic_diagnostics(model: ModelIR, backend: Backend | str = "exhaustive", tol: float = 1e-5) -> dict:
    """Relax every row with non-negative slacks and minimise their sum.

    Returns ``{"families": {family: total slack}, "rows": [(tag, slack), ...],
    "conflict": tag | None, "status": ...}``.  With the exhaustive back end the
    elastic problem is solved with integrality relaxed (one LP), so it names
    rows that no fractional point can satisfy; ``conflict`` is the row on which
    bound propagation of the original model failed, if it did.
    """
    if isinstance(backend, str):
        backend = Backend.parse(backend)
    comp = Compiled(model)
    lb, ub = comp.lb.copy(), comp.ub.copy()
    conflict = None if comp.propagate(lb, ub) else comp.conflict
    relax = backend.kind == "exhaustive"
    el = ModelIR(model.name + "_elastic")
    for vid, v in model.vars.items():
        el.add_var(vid, CONTINUOUS if relax else v.kind, v.lb, v.ub, v.tag)
    slack_of = {}
    total = {}
    for k, c in enumerate(model.constraints):
        s_up = el.add_var(f"__e{k}p", lb=0.0)
        terms = dict(c.terms)
        terms[s_up] = terms.get(s_up, 0.0) - 1.0
        slacks = [s_up]
        if c.kind == EQ:
            s_dn = el.add_var(f"__e{k}n", lb=0.0)
            terms[s_dn] = 1.0
            slacks.append(s_dn)
            el.eq(_mk(terms), c.rhs, c.tag)
        elif c.kind == QLE and relax:
            _polygon_rows(el, c, terms)
        elif c.kind == QLE:
            el.quad_le({a: w for (a, _), w in c.quad.items()}, _mk(terms), c.rhs, c.tag)
        else:
            el.le(_mk(terms), c.rhs, c.tag)
        slack_of[c.tag] = slacks
        for s in slacks:
            total[s] = 1.0
    el.minimize(_mk(total))
    if relax:
        status, values = _highs_lp(el)
    else:
        sol = solve_external(el, backend.command, timeout=backend.timeout)
        status, values = sol.status, sol.values
    rows = []
    fams: dict[str, float] = {}
    for tag, slacks in slack_of.items():
        s = sum(values.get(x, 0.0) for x in slacks)
        if s > tol:
            rows.append((tag, s))
            fam = tag.split("/", 1)[0]
            fams[fam] = fams.get(fam, 0.0) + s
    if conflict and not fams:
        fams[conflict.split("/", 1)[0]] = 0.0
    return {"families": fams, "rows": rows, "conflict": conflict, "status": status, "relaxed": relax}


def _polygon_rows(el: ModelIR, c, terms, n: int = 16):
    # a two-variable disk becomes its outer 16-gon, each side sharing the row's slack
    quad = list(c.quad.items())
    if len(quad) == 2 and not c.terms and quad[0][1] == quad[1][1]:
        (x, _), w = quad[0]
        (y, _), _ = quad[1]
        r = math.sqrt(c.rhs / w)
        for k in range(n):
            th = 2 * math.pi * k / n
            row = {x: math.cos(th), y: math.sin(th)}
            for s, a in terms.items():
                row[s] = row.get(s, 0.0) + a
            el.le(_mk(row), r, c.tag if k == 0 else f"{c.tag}/poly{k}")
    else:
        # fall back to the linear part only
        el.le(_mk(terms), c.rhs, c.tag)


def _highs_lp(model: ModelIR) -> tuple[str, dict[str, float]]:
    from scipy.optimize import linprog

    comp = Compiled(model)
    A, b, eq = comp.A, comp.b, comp.is_eq
    res = linprog(
        comp.c,
        A_ub=A[~eq] if (~eq).any() else None,
        b_ub=b[~eq] if (~eq).any() else None,
        A_eq=A[eq] if eq.any() else None,
        b_eq=b[eq] if eq.any() else None,
        bounds=[(lo if math.isfinite(lo) else None, hi if math.isfinite(hi) else None) for lo, hi in zip(comp.lb, comp.ub)],
        method="highs",
    )
    if res.status != 0:
        return {2: "infeasible", 3: "unbounded"}.get(res.status, "error"), {}
    return "optimal", {vid: float(res.x[k]) for k, vid in enumerate(comp.ids)}


def _mk(terms):
    return LinExpr(terms)
