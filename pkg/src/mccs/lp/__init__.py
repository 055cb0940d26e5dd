"""Linear programs for placement optimization and converse bounds."""

from mccs.lp.problems import (
    PlacementSolution,
    build,
    build_p0,
    build_p1,
    build_p2,
    lower_bound,
    optimize_mccs,
    p0_coefficients,
)
from mccs.lp.program import LinearProgram, LpSolution, LpStatus, to_lp_format
from mccs.lp.simplex import solve, solve_highs, solve_simplex

__all__ = [
    "LinearProgram", "LpSolution", "LpStatus", "PlacementSolution",
    "build", "build_p0", "build_p1", "build_p2", "lower_bound", "optimize_mccs",
    "p0_coefficients", "solve", "solve_highs", "solve_simplex", "to_lp_format",
]
