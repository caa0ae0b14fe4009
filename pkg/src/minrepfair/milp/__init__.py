"""Exact MILP solver for bounded integer variables: bounded-variable primal
simplex + branch-and-bound."""

from .bnb import solve_milp, warm_start
from .model import MilpModel, MilpSolution
from .simplex import Basis, LpProblem, LpResult, solve_lp

__all__ = ["MilpModel", "MilpSolution", "LpProblem", "LpResult", "Basis",
           "solve_lp", "solve_milp", "warm_start"]
