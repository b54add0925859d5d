"""LMI modeling and a small dense interior-point SDP solver."""

from .problem import (
    AffineBlock,
    DecisionVar,
    DimensionMismatchError,
    LmiProblem,
    LmiSolution,
    NEGATIVE_DEFINITE,
    POSITIVE_DEFINITE,
    SolverOptions,
    Term,
    UnknownVariableError,
    build_problem,
    check_assignment,
    dump_problem,
    evaluate_block,
    rect_var,
    scalar_var,
    solve,
    symmetric_var,
)

__all__ = [
    "AffineBlock",
    "DecisionVar",
    "DimensionMismatchError",
    "LmiProblem",
    "LmiSolution",
    "NEGATIVE_DEFINITE",
    "POSITIVE_DEFINITE",
    "SolverOptions",
    "Term",
    "UnknownVariableError",
    "build_problem",
    "check_assignment",
    "dump_problem",
    "evaluate_block",
    "rect_var",
    "scalar_var",
    "solve",
    "symmetric_var",
]
