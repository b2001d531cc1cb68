"""Global minimisation of a convex quadratic under one quadratic constraint.

Minimise ``(x - t)' A (x - t)`` subject to ``x' B x + 2 b' x - k = 0`` (or
``<= 0``), returning the infimum, whether it is attained, and a sampleable
description of the complete set of global minimisers.
"""
from .config import DEFAULT_CONFIG, SolverConfig
from .errors import (
    BracketFailure,
    InfeasibleConstraint,
    NoFeasiblePoints,
    NonConvexObjective,
    NotApplicable,
    NotAttained,
    QuadconError,
    ZeroObjectiveMatrix,
)
from .problem import ProblemSpec, Sense, eval_constraint, eval_loss, feasibility_check, negate_constraint
from .solution_sets import SolutionSet, SolveReport, pull_back, sample
from .solver import SolveOutcome, affine_constraint_solve, solve, solve_inequality

__all__ = [
    "BracketFailure", "DEFAULT_CONFIG", "InfeasibleConstraint", "NoFeasiblePoints",
    "NonConvexObjective", "NotApplicable", "NotAttained", "ProblemSpec", "QuadconError",
    "Sense", "SolutionSet", "SolveOutcome", "SolveReport", "SolverConfig", "ZeroObjectiveMatrix",
    "affine_constraint_solve", "eval_constraint", "eval_loss", "feasibility_check",
    "negate_constraint", "pull_back", "sample", "solve", "solve_inequality",
]
