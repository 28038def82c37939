"""Solver-agnostic mixed-integer model store and formulation helpers."""
from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

FEAS_TOL = 1e-6
INT_TOL = 1e-5

CONTINUOUS = "continuous"
BINARY = "binary"

LE = "linear-le"
EQ = "linear-eq"
QLE = "convex-quadratic-le"


class ModelError(ValueError):
    pass


class BigMWarning(UserWarning):
    """A big-M constant is smaller than the attainable range of its expression."""


@dataclass(frozen=True)
class VarDecl:
    id: str
    kind: str = CONTINUOUS
    lb: float = 0.0
    ub: float = math.inf
    tag: str = ""

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, BINARY):
            raise ModelError(f"{self.id}: unknown variable kind {self.kind!r}")
        if self.lb > self.ub:
            raise ModelError(f"{self.id}: lower bound {self.lb} above upper bound {self.ub}")
        if self.kind == BINARY and (self.lb < 0 or self.ub > 1):
            raise ModelError(f"{self.id}: binary bounds must lie in [0, 1]")

    @property
    def is_binary(self) -> bool:
        return self.kind == BINARY


@dataclass(frozen=True)
class Constraint:
    """``terms . x (+ sum quad) {<=, ==} rhs``.

    ``quad`` maps ``(var, var)`` pairs to coefficients; only diagonal
    (sum-of-squares) entries with positive weight are accepted.
    """

    kind: str
    terms: Mapping[str, float]
    rhs: float
    tag: str
    quad: Mapping[tuple[str, str], float] = field(default_factory=dict)


@dataclass
class Solution:
    status: str  # optimal | feasible | infeasible | unbounded | error
    values: dict[str, float] = field(default_factory=dict)
    objective: float = math.nan
    message: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible")

    def __getitem__(self, name: str) -> float:
        return self.values.get(name, 0.0)


class LinExpr:
    """Sparse linear expression over variable ids."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: Mapping[str, float] | None = None, const: float = 0.0):
        self.terms: dict[str, float] = dict(terms) if terms else {}
        self.const = float(const)

    @staticmethod
    def of(x: "ExprLike") -> "LinExpr":
        if isinstance(x, LinExpr):
            return x
        if isinstance(x, str):
            return LinExpr({x: 1.0})
        return LinExpr(const=float(x))

    def copy(self) -> "LinExpr":
        return LinExpr(self.terms, self.const)

    def add(self, other: "ExprLike", scale: float = 1.0) -> "LinExpr":
        """In-place ``self += scale * other``."""
        o = LinExpr.of(other)
        t = self.terms
        for k, v in o.terms.items():
            t[k] = t.get(k, 0.0) + scale * v
        self.const += scale * o.const
        return self

    def __add__(self, other):
        return self.copy().add(other)

    __radd__ = __add__

    def __sub__(self, other):
        return self.copy().add(other, -1.0)

    def __rsub__(self, other):
        return LinExpr.of(other).copy().add(self, -1.0)

    def __neg__(self):
        return LinExpr({k: -v for k, v in self.terms.items()}, -self.const)

    def __mul__(self, k: float):
        k = float(k)
        return LinExpr({n: k * v for n, v in self.terms.items()}, k * self.const)

    __rmul__ = __mul__

    def __repr__(self):
        parts = [f"{v:+g}*{k}" for k, v in self.terms.items()]
        if self.const or not parts:
            parts.append(f"{self.const:+g}")
        return "LinExpr(" + " ".join(parts) + ")"

    def value(self, values: Mapping[str, float]) -> float:
        return self.const + sum(v * values.get(k, 0.0) for k, v in self.terms.items())


ExprLike = Union[LinExpr, str, float, int]


def lin_sum(items: Iterable[ExprLike]) -> LinExpr:
    out = LinExpr()
    for it in items:
        out.add(it)
    return out


class ModelIR:
    """Ordered store of variables, tagged constraints and a linear objective.

    Tags are unique.  By convention a tag is ``family/element/...`` and the
    family prefix drives :meth:`census`.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.vars: dict[str, VarDecl] = {}
        self.constraints: list[Constraint] = []
        self._tags: set[str] = set()
        self.sense = "max"
        self.objective: dict[str, float] = {}
        self.objective_tag = "objective"

    # ---------------------------------------------------------------- vars
    def add_var(self, id: str, kind: str = CONTINUOUS, lb: float = 0.0, ub: float = math.inf, tag: str = "") -> str:
        if id in self.vars:
            raise ModelError(f"duplicate variable id {id!r}")
        self.vars[id] = VarDecl(id, kind, float(lb), float(ub), tag)
        return id

    def binary(self, id: str, tag: str = "") -> str:
        return self.add_var(id, BINARY, 0.0, 1.0, tag)

    def fix(self, id: str, value: float):
        v = self.vars[id]
        self.vars[id] = VarDecl(v.id, v.kind, float(value), float(value), v.tag)

    def set_bounds(self, id: str, lb: float | None = None, ub: float | None = None):
        v = self.vars[id]
        self.vars[id] = VarDecl(v.id, v.kind, v.lb if lb is None else float(lb), v.ub if ub is None else float(ub), v.tag)

    @property
    def binaries(self) -> list[str]:
        return [v.id for v in self.vars.values() if v.is_binary]

    # ---------------------------------------------------------- constraints
    def _push(self, kind, expr: LinExpr, tag: str, quad=None):
        if tag in self._tags:
            raise ModelError(f"duplicate constraint tag {tag!r}")
        terms = {k: v for k, v in expr.terms.items() if v != 0.0}
        for k in terms:
            if k not in self.vars:
                raise ModelError(f"{tag}: undeclared variable {k!r}")
        for a, b in quad or {}:
            for k in (a, b):
                if k not in self.vars:
                    raise ModelError(f"{tag}: undeclared variable {k!r}")
        c = Constraint(kind, terms, -expr.const, tag, dict(quad or {}))
        self._tags.add(tag)
        self.constraints.append(c)
        return c

    def drop(self, tag: str) -> Constraint:
        """Remove the constraint tagged ``tag``."""
        for k, c in enumerate(self.constraints):
            if c.tag == tag:
                self._tags.discard(tag)
                return self.constraints.pop(k)
        raise ModelError(f"no constraint tagged {tag!r}")

    def le(self, lhs: ExprLike, rhs: ExprLike, tag: str) -> Constraint:
        """``lhs <= rhs``."""
        return self._push(LE, LinExpr.of(lhs) - LinExpr.of(rhs), tag)

    def ge(self, lhs: ExprLike, rhs: ExprLike, tag: str) -> Constraint:
        return self._push(LE, LinExpr.of(rhs) - LinExpr.of(lhs), tag)

    def eq(self, lhs: ExprLike, rhs: ExprLike, tag: str) -> Constraint:
        return self._push(EQ, LinExpr.of(lhs) - LinExpr.of(rhs), tag)

    def quad_le(self, squares: Mapping[str, float], lin: ExprLike, rhs: float, tag: str) -> Constraint:
        """``sum_k w_k x_k^2 + lin <= rhs`` with all ``w_k > 0``."""
        if any(w <= 0 for w in squares.values()):
            raise ModelError(f"{tag}: quadratic weights must be positive (convex sum of squares)")
        quad = {(k, k): float(w) for k, w in squares.items()}
        return self._push(QLE, LinExpr.of(lin) - float(rhs), tag, quad)

    def maximize(self, expr: ExprLike):
        e = LinExpr.of(expr)
        self.sense, self.objective = "max", dict(e.terms)

    def minimize(self, expr: ExprLike):
        e = LinExpr.of(expr)
        self.sense, self.objective = "min", dict(e.terms)

    # ------------------------------------------------------------- queries
    @property
    def has_quadratic(self) -> bool:
        return any(c.kind == QLE for c in self.constraints)

    def validate(self):
        for k in self.objective:
            if k not in self.vars:
                raise ModelError(f"objective references undeclared variable {k!r}")

    def census(self) -> Counter:
        """Constraint count per tag family (the prefix before the first '/')."""
        cnt = Counter(c.tag.split("/", 1)[0] for c in self.constraints)
        if self.objective:
            cnt[self.objective_tag] += 1
        return cnt

    def objective_value(self, values: Mapping[str, float]) -> float:
        return sum(c * values.get(k, 0.0) for k, c in self.objective.items())

    def violations(self, values: Mapping[str, float], tol: float = FEAS_TOL) -> list[tuple[str, float]]:
        """Constraints (and bounds) violated by ``values`` beyond ``tol``."""
        out = []
        for v in self.vars.values():
            x = values.get(v.id, 0.0)
            if x < v.lb - tol or x > v.ub + tol:
                out.append((f"bound:{v.id}", max(v.lb - x, x - v.ub)))
            if v.is_binary and min(abs(x), abs(1 - x)) > INT_TOL:
                out.append((f"integrality:{v.id}", min(abs(x), abs(1 - x))))
        for c in self.constraints:
            act = sum(a * values.get(k, 0.0) for k, a in c.terms.items())
            act += sum(w * values.get(a, 0.0) * values.get(b, 0.0) for (a, b), w in c.quad.items())
            viol = abs(act - c.rhs) if c.kind == EQ else act - c.rhs
            scale = max(1.0, abs(c.rhs))
            if viol > tol * scale:
                out.append((c.tag, viol))
        return out

    def linear_box(self, expr: LinExpr) -> tuple[float, float]:
        lo = hi = expr.const
        for k, a in expr.terms.items():
            v = self.vars[k]
            lo += a * (v.lb if a > 0 else v.ub)
            hi += a * (v.ub if a > 0 else v.lb)
        return lo, hi


# ----------------------------------------------------------------- helpers


def add_big_m_switchable(
    model: ModelIR,
    expr: ExprLike,
    indicator: str,
    big_m: float,
    tag: str,
    lo: float = 0.0,
    hi: float = 0.0,
    active_when: int = 1,
) -> tuple[Constraint, Constraint]:
    """Enforce ``lo <= expr <= hi`` only when ``indicator == active_when``.

    Otherwise the band widens by ``big_m`` on each side.  Warns with
    :class:`BigMWarning` if ``big_m`` cannot cover the expression's box range.
    """
    if not math.isfinite(big_m) or big_m < 0:
        raise ModelError(f"{tag}: big-M must be finite and non-negative")
    e = LinExpr.of(expr)
    elo, ehi = model.linear_box(e)
    if elo < lo - big_m - 1e-9 or ehi > hi + big_m + 1e-9:
        warnings.warn(f"{tag}: big-M {big_m:g} smaller than attainable range [{elo:g}, {ehi:g}]", BigMWarning, stacklevel=2)
    # slack = M*(1-y) when active at 1, M*y when active at 0
    slack = LinExpr({indicator: -big_m}, big_m) if active_when else LinExpr({indicator: big_m})
    c1 = model.le(e, slack + hi, f"{tag}/hi")
    c2 = model.ge(e, (slack * -1.0) + lo, f"{tag}/lo")
    return c1, c2


def mccormick_binary_product(model: ModelIR, delta: str, x: str, w: str, tag: str) -> list[Constraint]:
    """Declare ``w`` and constrain it to equal ``delta * x`` (exact for binary delta)."""
    xv = model.vars[x]
    xl, xu = xv.lb, xv.ub
    if not (math.isfinite(xl) and math.isfinite(xu)):
        raise ModelError(f"{tag}: McCormick product needs finite bounds on {x!r}")
    model.add_var(w, CONTINUOUS, min(xl, 0.0), max(xu, 0.0), tag)
    return [
        model.le(w, LinExpr({delta: xu}), f"{tag}/mc1"),
        model.ge(w, LinExpr({delta: xl}), f"{tag}/mc2"),
        model.le(w, LinExpr({x: 1.0, delta: xl}, -xl), f"{tag}/mc3"),
        model.ge(w, LinExpr({x: 1.0, delta: xu}, -xu), f"{tag}/mc4"),
    ]


def parse_quad_mode(mode) -> tuple[str, int]:
    """``"quadratic"``, ``"polygon"`` (16 sides), ``"polygon(n)"`` or ``("polygon", n)``."""
    if isinstance(mode, tuple):
        kind, n = mode
    elif mode == "quadratic":
        return "quadratic", 0
    elif isinstance(mode, str) and mode.startswith("polygon"):
        kind, rest = "polygon", mode[len("polygon"):].strip("()")
        n = int(rest) if rest else 16
    else:
        raise ModelError(f"unknown quadratic mode {mode!r}")
    if kind != "polygon" or n < 8:
        raise ModelError("polygon mode needs n >= 8")
    return "polygon", int(n)


def quad_capability(model: ModelIR, p: str, q: str, radius: float, mode, tag: str) -> list[Constraint]:
    """``p^2 + q^2 <= radius^2`` as one quadratic row or an outer ``n``-gon."""
    if radius <= 0:
        raise ModelError(f"{tag}: radius must be positive")
    kind, n = parse_quad_mode(mode)
    if kind == "quadratic":
        return [model.quad_le({p: 1.0, q: 1.0}, 0.0, radius * radius, tag)]
    cuts = []
    for k in range(n):
        th = 2 * math.pi * k / n
        c, s = math.cos(th), math.sin(th)
        terms = {}
        if abs(c) > 1e-15:
            terms[p] = c
        if abs(s) > 1e-15:
            terms[q] = s
        cuts.append(model.le(LinExpr(terms), radius, f"{tag}/poly{k}"))
    return cuts
