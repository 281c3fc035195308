from .branch_bound import solve_mip
from .mps import export_mps, import_mps
from .problem import (BINARY, CONTINUOUS, LE, EQ, GE,
                      OPTIMAL, FEASIBLE, INFEASIBLE, TIME_LIMIT, UNBOUNDED,
                      MipProblem, MipSolution, ProblemBuilder, fix_and_sub)
from .simplex import SimplexEngine, solve_lp

__all__ = [
    "BINARY", "CONTINUOUS", "LE", "EQ", "GE",
    "OPTIMAL", "FEASIBLE", "INFEASIBLE", "TIME_LIMIT", "UNBOUNDED",
    "MipProblem", "MipSolution", "ProblemBuilder", "fix_and_sub",
    "SimplexEngine", "solve_lp", "solve_mip", "export_mps", "import_mps",
]
