"""Mixed-integer model store, text emitters and solver back ends."""
from .ir import (
    BINARY,
    CONTINUOUS,
    EQ,
    FEAS_TOL,
    INT_TOL,
    LE,
    QLE,
    BigMWarning,
    Constraint,
    LinExpr,
    ModelError,
    ModelIR,
    Solution,
    VarDecl,
    add_big_m_switchable,
    lin_sum,
    mccormick_binary_product,
    quad_capability,
)
from .solve import (
    Backend,
    ExhaustiveLimitError,
    cbc_template,
    elastic_diagnostics,
    find_cbc,
    solve,
    solve_exhaustive,
    solve_external,
)
from .writers import emit_lp, emit_mps

__all__ = [
    "BINARY", "CONTINUOUS", "EQ", "FEAS_TOL", "INT_TOL", "LE", "QLE",
    "Backend", "BigMWarning", "Constraint", "ExhaustiveLimitError", "LinExpr", "ModelError",
    "ModelIR", "Solution", "VarDecl", "add_big_m_switchable", "cbc_template",
    "elastic_diagnostics", "emit_lp", "emit_mps", "find_cbc", "lin_sum",
    "mccormick_binary_product", "quad_capability", "solve", "solve_exhaustive", "solve_external",
]
