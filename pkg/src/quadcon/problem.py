"""The problem quintuple ``(A, B, t, b, k)`` and constraint feasibility.

The problem is::

    minimise  L(x) = (x - t)' A (x - t)
    subject to Q(x) = x' B x + 2 b' x - k  = 0   (or <= 0)

with ``A`` symmetric positive (semi-)definite and nonzero.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_CONFIG, SolverConfig
from .errors import DimensionMismatch, NonConvexObjective, NonFiniteInput, ZeroObjectiveMatrix
from .linalg import Spectrum, matrix_scale, mp_split, numeric_rank, spectral_decompose, sym_matrix


class Sense(str, enum.Enum):
    EQUALITY = "eq"
    LESS_EQUAL = "le"


def _vector(values, n, name):
    v = np.array(values, dtype=float).reshape(-1)
    if v.shape != (n,):
        raise DimensionMismatch(f"{name} must have length {n}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteInput(f"{name} has non-finite entries")
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    A: np.ndarray
    B: np.ndarray
    t: np.ndarray
    b: np.ndarray
    k: float
    sense: Sense = Sense.EQUALITY

    def __post_init__(self):
        A = sym_matrix(self.A, name="A")
        n = A.shape[0]
        B = sym_matrix(self.B, name="B")
        if B.shape != (n, n):
            raise DimensionMismatch(f"B must be {n}x{n}, got {B.shape}")
        k = float(self.k)
        if not np.isfinite(k):
            raise NonFiniteInput("k is not finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "t", _vector(self.t, n, "t"))
        object.__setattr__(self, "b", _vector(self.b, n, "b"))
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "sense", Sense(self.sense))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def scale(self) -> float:
        return max(
            matrix_scale(self.A), matrix_scale(self.B), matrix_scale(self.t),
            matrix_scale(self.b), matrix_scale([self.k]),
        )

    def replace(self, **changes) -> "ProblemSpec":
        kw = dict(A=self.A, B=self.B, t=self.t, b=self.b, k=self.k, sense=self.sense)
        kw.update(changes)
        return ProblemSpec(**kw)

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(), "B": self.B.tolist(), "t": self.t.tolist(),
            "b": self.b.tolist(), "k": self.k, "sense": self.sense.value,
        }


def eval_loss(problem: ProblemSpec, x) -> float:
    d = np.asarray(x, dtype=float) - problem.t
    return float(d @ problem.A @ d)


def eval_constraint(problem: ProblemSpec, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x @ problem.B @ x + 2.0 * problem.b @ x - problem.k)


def constraint_scale(problem: ProblemSpec, x) -> float:
    """Magnitude of the terms of ``Q(x)``; feasibility is judged relative to it."""
    x = np.asarray(x, dtype=float)
    return max(1.0, abs(float(x @ problem.B @ x)) + 2.0 * abs(float(problem.b @ x)) + abs(problem.k))


def negate_constraint(problem: ProblemSpec) -> ProblemSpec:
    """``(B, b, k) -> (-B, -b, -k)``; for ``<=`` this is the reverse inequality."""
    return problem.replace(B=-problem.B, b=-problem.b, k=-problem.k)


@dataclass(frozen=True)
class Validation:
    r: int
    n: int
    spectrum: Spectrum
    min_eigenvalue_margin: float


def validate(problem: ProblemSpec, cfg: SolverConfig = DEFAULT_CONFIG) -> Validation:
    spec = spectral_decompose(
        problem.A, cfg.tol_cluster, jacobi_tol=cfg.jacobi_tol,
        max_sweeps=cfg.jacobi_max_sweeps, name="A",
    )
    scale = spec.scale
    r = numeric_rank(spec, cfg.tol_rank)
    if r == 0:
        raise ZeroObjectiveMatrix("objective matrix A is numerically zero")
    lowest = float(spec.eigenvalues[-1])
    if lowest < -cfg.tol_rank * scale:
        raise NonConvexObjective(f"A has negative eigenvalue {lowest:.6g}; objective is not convex")
    return Validation(r=r, n=problem.n, spectrum=spec, min_eigenvalue_margin=lowest / scale)


class Verdict(str, enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class FeasibilityAnalysis:
    x_b: np.ndarray
    b_perp: np.ndarray
    k_plus: float
    verdict: Verdict
    case: str | None = None
    margins: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.verdict is Verdict.FEASIBLE


def signature(values, tol: float) -> tuple[int, int, int]:
    """Counts of (positive, zero, negative) values, zero meaning ``|v| <= tol``."""
    values = np.asarray(values, dtype=float)
    pos = int(np.sum(values > tol))
    neg = int(np.sum(values < -tol))
    return pos, len(values) - pos - neg, neg


def feasibility_check(B, b, k: float, cfg: SolverConfig = DEFAULT_CONFIG) -> FeasibilityAnalysis:
    """Decide whether ``x'Bx + 2b'x - k = 0`` has a solution.

    Uses ``Q(x) = (x + x_b)'B(x + x_b) + 2 b_perp'(x + x_b) - k_plus`` with
    ``x_b = B^- b`` and ``k_plus = k + b'B^- b``.  Infeasible exactly when:

    * case I:   ``B = O``, ``b_perp = 0``, ``k_plus != 0``;
    * case II:  ``B`` nonsingular and ``-k_plus B`` positive definite;
    * case III: ``B != O`` singular, ``b_perp = 0``, ``k_plus != 0`` and
      ``k_plus B`` has no positive eigenvalue.
    """
    B = np.asarray(B, dtype=float)
    b = np.asarray(b, dtype=float)
    spec = spectral_decompose(B, cfg.tol_cluster, jacobi_tol=cfg.jacobi_tol,
                              max_sweeps=cfg.jacobi_max_sweeps, name="B")
    x_b, b_perp = mp_split(B, b, cfg.tol_rank, spec=spec)
    k_plus = float(k + b @ x_b)

    eig_tol = cfg.tol_rank * spec.scale
    pos, zero, neg = signature(spec.eigenvalues, eig_tol)
    n = len(b)
    b_perp_norm = float(np.linalg.norm(b_perp))
    b_perp_zero = b_perp_norm <= cfg.tol_class * matrix_scale(b)
    k_tol = cfg.tol_class * max(1.0, abs(k), abs(float(b @ x_b)))
    k_zero = abs(k_plus) <= k_tol
    margins = {
        "b_perp_norm": b_perp_norm,
        "k_plus": k_plus,
        "min_abs_eigenvalue_B": float(np.min(np.abs(spec.eigenvalues))) if n else 0.0,
    }

    case = None
    if zero == n:
        if b_perp_zero and not k_zero:
            case = "I"
    elif zero == 0:
        # -k_plus B positive definite: k_plus nonzero and every eigenvalue of opposite sign.
        if not k_zero and ((k_plus > 0 and neg == n) or (k_plus < 0 and pos == n)):
            case = "II"
    else:
        if b_perp_zero and not k_zero and ((k_plus > 0 and pos == 0) or (k_plus < 0 and neg == 0)):
            case = "III"
    verdict = Verdict.FEASIBLE if case is None else Verdict.INFEASIBLE
    return FeasibilityAnalysis(x_b, b_perp, k_plus, verdict, case, margins)


def sublevel_nonempty(B, b, k: float, cfg: SolverConfig = DEFAULT_CONFIG) -> tuple[bool, float]:
    """Whether ``{x : x'Bx + 2b'x - k <= 0}`` is nonempty.

    Returns ``(nonempty, inf Q)``.  ``inf Q`` is ``-inf`` when ``B`` has a
    negative eigenvalue or ``b`` has a component in the null space of a
    positive semi-definite ``B``; otherwise it equals ``-k_plus``.
    """
    B = np.asarray(B, dtype=float)
    b = np.asarray(b, dtype=float)
    if B.size == 0:
        return (-k <= cfg.tol_class * max(1.0, abs(k))), -float(k)
    spec = spectral_decompose(B, cfg.tol_cluster, jacobi_tol=cfg.jacobi_tol,
                              max_sweeps=cfg.jacobi_max_sweeps, name="B")
    eig_tol = cfg.tol_rank * spec.scale
    if np.any(spec.eigenvalues < -eig_tol):
        return True, -np.inf
    x_b, b_perp = mp_split(B, b, cfg.tol_rank, spec=spec)
    if np.linalg.norm(b_perp) > cfg.tol_class * matrix_scale(b):
        return True, -np.inf
    k_plus = float(k + b @ x_b)
    inf_q = -k_plus
    return inf_q <= cfg.tol_class * max(1.0, abs(k), abs(float(b @ x_b))), inf_q
