"""Exception hierarchy shared by every stage of the solver."""


class QuadconError(Exception):
    """Base class for all solver errors."""

    code = "error"


class DimensionMismatch(QuadconError, ValueError):
    code = "dimension_mismatch"


class AsymmetricMatrix(QuadconError, ValueError):
    code = "asymmetric_matrix"


class NonFiniteInput(QuadconError, ValueError):
    code = "non_finite_input"


class ZeroObjectiveMatrix(QuadconError, ValueError):
    """The objective matrix is numerically zero (the problem requires A != O)."""

    code = "zero_objective_matrix"


class NonConvexObjective(QuadconError, ValueError):
    code = "non_convex_objective"


class ConvergenceError(QuadconError, RuntimeError):
    code = "eigensolver_no_convergence"


class SingularTransform(QuadconError, ValueError):
    code = "singular_transform"


class InfeasibleConstraint(QuadconError):
    """The constraint set is empty.

    ``case`` is one of ``"I"``, ``"II"``, ``"III"`` for the three ways an
    equality constraint ``x'Bx + 2b'x - k = 0`` can fail to have a solution,
    or ``"LE"`` when the sublevel set ``{x : Q(x) <= 0}`` is empty.
    """

    code = "infeasible_constraint"

    def __init__(self, case, message=None):
        self.case = case
        super().__init__(message or f"constraint infeasible (case {case})")


class NoPositiveEigenvalue(QuadconError, ValueError):
    code = "no_positive_eigenvalue"


class PoleProximity(QuadconError, ValueError):
    code = "pole_proximity"


class BracketFailure(QuadconError, RuntimeError):
    """No sign change of the secular function where the classification promised one."""

    code = "bracket_failure"

    def __init__(self, message, **diagnostics):
        self.diagnostics = {k: float(v) if v is not None else None for k, v in diagnostics.items()}
        detail = ", ".join(f"{k}={v!r}" for k, v in self.diagnostics.items())
        super().__init__(f"{message} ({detail})" if detail else message)


class NotAttained(QuadconError):
    code = "not_attained"


class NotApplicable(QuadconError):
    code = "not_applicable"


class NoFeasiblePoints(QuadconError):
    code = "no_feasible_points"
