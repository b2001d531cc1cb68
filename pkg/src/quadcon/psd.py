"""Centred least-squares problems whose objective matrix is singular.

Works in simplified coordinates ``(x1, y0, z0)`` where the loss is
``||x1||^2`` and, for fixed ``x1``,

    Q = (z0 - centre)' Gamma0 (z0 - centre) + 2 (C10' x1 + c0)' y0 + Q1(x1),

with ``centre = -Gamma0^{-1} d0`` and ``Q1(x1) = x1'B11x1 + 2b1'x1 - k1``.
Whether ``x1 = 0`` is feasible, only approachable, or bounded away from the
feasible projection decides the three outcomes below.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_CONFIG, SolverConfig
from .linalg import matrix_scale
from .problem import ProblemSpec
from .solution_sets import AffineFree, ApproachPath, PinnedPoint, QuadricSlice, SolutionSet, Trace
from .transforms import SimplifiedFormData


class PsdCase(str, enum.Enum):
    PERFECT = "Perfect"
    ESSENTIALLY_PERFECT = "EssentiallyPerfect"
    PROJECTED_IMPERFECT = "ProjectedImperfect"


class PsdBranch(str, enum.Enum):
    S0_ZERO = "S0Zero"
    S0_FULL = "S0Full"
    S0_MID = "S0Mid"


class FiberKind(str, enum.Enum):
    FULL_SPACE = "FullSpace"
    SINGLE_POINT = "SinglePoint"
    QUADRIC_SLICE = "QuadricSlice"
    UNION_OVER_LINEAR = "UnionOverLinear"
    SUBLEVEL = "Sublevel"


def _unit(rng, m):
    u = rng.standard_normal(m)
    norm = np.linalg.norm(u)
    while norm == 0.0:
        u = rng.standard_normal(m)
        norm = np.linalg.norm(u)
    return u / norm


@dataclass(frozen=True, eq=False)
class FiberDescription:
    """A subset of ``x0 = (y0, z0)`` space, ``y0`` of size ``p`` and ``z0`` of size ``s0``.

    * ``FullSpace``: every ``x0``.
    * ``SinglePoint`` / ``QuadricSlice``: ``y0`` free, ``z0 - centre`` on the
      level set ``u' Gamma0 u = alpha``.
    * ``UnionOverLinear``: ``u' Gamma0 u + 2 c0' y0 = alpha``.
    * ``Sublevel``: ``u' Gamma0 u + 2 c0' y0 <= alpha``.
    """

    kind: FiberKind
    p: int
    gamma0: np.ndarray
    centre: np.ndarray
    alpha: float = 0.0
    c0: np.ndarray | None = None

    @property
    def s0(self) -> int:
        return len(self.gamma0)

    @property
    def dim(self) -> int:
        return self.p + self.s0

    def _split(self, x0):
        x0 = np.asarray(x0, dtype=float)
        return x0[: self.p], x0[self.p:] - self.centre

    def residual(self, x0) -> float:
        """Signed defect of the defining relation (zero for members of equality fibres)."""
        y0, u = self._split(x0)
        value = float(u @ (self.gamma0 * u))
        if self.kind in (FiberKind.UNION_OVER_LINEAR, FiberKind.SUBLEVEL) and self.c0 is not None:
            value += 2.0 * float(self.c0 @ y0)
        if self.kind is FiberKind.FULL_SPACE:
            return 0.0
        return value - self.alpha

    def contains(self, x0, tol: float = 1e-8) -> bool:
        defect = self.residual(x0)
        if self.kind is FiberKind.SUBLEVEL:
            return defect <= tol
        return abs(defect) <= tol

    def _level_point(self, alpha: float) -> np.ndarray:
        # Deterministic point on u' Gamma0 u = alpha: use one coordinate of matching sign.
        u = np.zeros(self.s0)
        if alpha == 0.0 or self.s0 == 0:
            return u
        matching = np.flatnonzero(np.sign(self.gamma0) == np.sign(alpha))
        j = int(matching[0])
        u[j] = np.sqrt(alpha / self.gamma0[j])
        return u

    def representative(self) -> np.ndarray:
        y0 = np.zeros(self.p)
        if self.kind is FiberKind.FULL_SPACE:
            return np.zeros(self.dim)
        if self.kind is FiberKind.UNION_OVER_LINEAR:
            u = np.zeros(self.s0)
            y0 = self.alpha * self.c0 / (2.0 * float(self.c0 @ self.c0))
            return np.r_[y0, self.centre + u]
        if self.kind is FiberKind.SUBLEVEL:
            return self._sublevel_representative()
        return np.r_[y0, self.centre + self._level_point(self.alpha)]

    def _sublevel_representative(self):
        y0 = np.zeros(self.p)
        if self.c0 is not None and np.any(self.c0):
            y0 = min(self.alpha, 0.0) * self.c0 / (2.0 * float(self.c0 @ self.c0))
            return np.r_[y0, self.centre]
        if self.s0 == 0:
            return y0
        attainable = self._clip_level(self.alpha)
        return np.r_[y0, self.centre + self._level_point(attainable)]

    def _clip_level(self, alpha):
        has_pos = np.any(self.gamma0 > 0)
        has_neg = np.any(self.gamma0 < 0)
        if has_pos and has_neg:
            return alpha
        if has_pos:
            return max(alpha, 0.0)
        return min(alpha, 0.0)

    def _sample_level(self, rng, alpha: float, scale: float) -> np.ndarray:
        """Point ``u`` with ``u' Gamma0 u = alpha``; the set must be nonempty."""
        pos = self.gamma0 > 0
        neg = ~pos
        u = np.zeros(self.s0)
        if alpha >= 0.0 and pos.any():
            free, solve = neg, pos
        elif alpha <= 0.0 and neg.any():
            free, solve = pos, neg
        else:
            return u
        u[free] = scale * rng.standard_normal(int(free.sum()))
        # Remaining mass on the solved side: |sum over solve| = |alpha| + |free part|.
        mass = abs(alpha) + float(np.sum(np.abs(self.gamma0[free]) * u[free] ** 2))
        direction = _unit(rng, int(solve.sum()))
        weight = float(np.sum(np.abs(self.gamma0[solve]) * direction ** 2))
        u[solve] = direction * np.sqrt(mass / weight)
        return u

    def sample(self, rng, scale: float = 1.0) -> np.ndarray:
        if self.kind is FiberKind.FULL_SPACE:
            return scale * rng.standard_normal(self.dim)
        y0 = scale * rng.standard_normal(self.p)
        if self.kind in (FiberKind.SINGLE_POINT, FiberKind.QUADRIC_SLICE):
            return np.r_[y0, self.centre + self._sample_level(rng, self.alpha, scale)]
        if self.kind is FiberKind.UNION_OVER_LINEAR:
            u = scale * rng.standard_normal(self.s0)
            target = self.alpha - float(u @ (self.gamma0 * u))
            return np.r_[self._solve_linear(y0, target), self.centre + u]
        return self._sample_sublevel(rng, y0, scale)

    def _solve_linear(self, y0, target):
        # Keep the component of y0 orthogonal to c0 and fix 2 c0'y0 = target.
        c0 = self.c0
        cc = float(c0 @ c0)
        y0 = y0 - (float(c0 @ y0) / cc) * c0
        return y0 + target * c0 / (2.0 * cc)

    def _sample_sublevel(self, rng, y0, scale):
        slack = scale * rng.exponential()
        if self.c0 is not None and np.any(self.c0):
            u = scale * rng.standard_normal(self.s0)
            target = self.alpha - slack - float(u @ (self.gamma0 * u))
            return np.r_[self._solve_linear(y0, target), self.centre + u]
        if self.s0 == 0:
            return y0
        has_pos = np.any(self.gamma0 > 0)
        has_neg = np.any(self.gamma0 < 0)
        if has_pos and not has_neg:
            level = self.alpha * rng.random()
        elif has_neg and not has_pos:
            level = min(self.alpha, 0.0) - slack
        else:
            level = self.alpha - slack
        return np.r_[y0, self.centre + self._sample_level(rng, level, scale)]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value, "p": self.p, "gamma0": self.gamma0.tolist(),
            "centre": self.centre.tolist(), "alpha": self.alpha,
            "c0": None if self.c0 is None else self.c0.tolist(),
        }


@dataclass(frozen=True, eq=False)
class PsdClassification:
    case: PsdCase
    branch: PsdBranch
    witness: FiberDescription | None = None
    projected: ProblemSpec | None = None
    margins: dict | None = None


def _data_scales(data: SimplifiedFormData):
    gamma_term = float(np.sum(data.d0 ** 2 / data.gamma0)) if data.s0 else 0.0
    k_scale = max(1.0, abs(data.k), abs(gamma_term))
    b_scale = matrix_scale(np.r_[data.b1, data.c0, data.d0])
    B_scale = max(matrix_scale(data.B11), matrix_scale(data.C10), matrix_scale(data.gamma0))
    return k_scale, b_scale, B_scale


def _centre(data: SimplifiedFormData) -> np.ndarray:
    return -data.d0 / data.gamma0 if data.s0 else np.zeros(0)


def _projected_form(data: SimplifiedFormData) -> ProblemSpec:
    r = data.r
    return ProblemSpec(A=np.eye(r), B=data.B11, t=np.zeros(r), b=data.b1, k=data.k1)


def classify_psd(data: SimplifiedFormData, cfg: SolverConfig = DEFAULT_CONFIG,
                 trace: Trace | None = None) -> PsdClassification:
    """Decide perfect / essentially perfect / projected-imperfect for simplified-form data."""
    trace = trace if trace is not None else Trace()
    n, r, s0, p = data.n, data.r, data.s0, data.p
    k_scale, b_scale, B_scale = _data_scales(data)
    k1_zero = trace.zero("k1", data.k1, cfg.tol_class * k_scale)
    c0_norm = float(np.linalg.norm(data.c0))
    c0_zero = trace.zero("c0_norm", c0_norm, cfg.tol_class * b_scale)
    c10_max = float(np.max(np.abs(data.C10))) if data.C10.size else 0.0
    c10_zero = trace.zero("C10_max", c10_max, cfg.tol_class * B_scale)

    if s0 == 0:
        branch = PsdBranch.S0_ZERO
    elif s0 == n - r:
        branch = PsdBranch.S0_FULL
    else:
        branch = PsdBranch.S0_MID

    k1 = 0.0 if k1_zero else data.k1
    gamma0 = data.gamma0
    centre = _centre(data)
    # k1 * Gamma0 has a positive eigenvalue.
    level_reachable = (k1 > 0 and np.any(gamma0 > 0)) or (k1 < 0 and np.any(gamma0 < 0))
    margins = {"k1": data.k1, "c0_norm": c0_norm, "C10_max": c10_max,
               "min_abs_gamma0": float(np.min(np.abs(gamma0))) if s0 else np.inf}

    witness = None
    if branch is PsdBranch.S0_ZERO:
        if not c0_zero:
            witness = FiberDescription(FiberKind.UNION_OVER_LINEAR, p, gamma0, centre, k1, data.c0.copy())
        elif k1_zero:
            witness = FiberDescription(FiberKind.FULL_SPACE, p, gamma0, centre)
    elif branch is PsdBranch.S0_FULL or c0_zero:
        if k1_zero or level_reachable:
            definite = bool(np.all(gamma0 > 0) or np.all(gamma0 < 0))
            kind = FiberKind.SINGLE_POINT if (k1_zero and definite and p == 0) else FiberKind.QUADRIC_SLICE
            witness = FiberDescription(kind, p, gamma0, centre, k1)
    else:
        witness = FiberDescription(FiberKind.UNION_OVER_LINEAR, p, gamma0, centre, k1, data.c0.copy())

    if witness is not None:
        case = PsdCase.PERFECT
    elif branch is PsdBranch.S0_FULL or c10_zero:
        case = PsdCase.PROJECTED_IMPERFECT
    else:
        case = PsdCase.ESSENTIALLY_PERFECT
    trace.add("psd_classification", f"{case.value}/{branch.value}")
    projected = _projected_form(data) if case is PsdCase.PROJECTED_IMPERFECT else None
    return PsdClassification(case, branch, witness, projected, margins)


def approach_path(data: SimplifiedFormData) -> ApproachPath:
    """Feasible curve with loss ``tau^2`` for the essentially perfect case.

    ``x1 = tau v`` with ``v`` along the largest column of ``C10``,
    ``z0 = centre`` and ``y0`` solving the constraint, which is linear in it.
    """
    r, p, n = data.r, data.p, data.n
    j = int(np.argmax(np.linalg.norm(data.C10, axis=0)))
    v = data.C10[:, j] / np.linalg.norm(data.C10[:, j])
    w = data.C10.T @ v
    u = w / (2.0 * float(w @ w))
    coeffs = {j: np.zeros(n) for j in (-1, 0, 1)}
    coeffs[1][:r] = v
    coeffs[1][r:r + p] = -float(v @ data.B11 @ v) * u
    coeffs[0][r:r + p] = -2.0 * float(data.b1 @ v) * u
    coeffs[0][r + p:] = _centre(data)
    coeffs[-1][r:r + p] = data.k1 * u
    return ApproachPath(coeffs, 1.0)


def _x0_basis(n: int, r: int) -> np.ndarray:
    E = np.zeros((n, n - r))
    E[r:, :] = np.eye(n - r)
    return E


def solve_psd(data: SimplifiedFormData, classification: PsdClassification, solve_projected,
              cfg: SolverConfig = DEFAULT_CONFIG, trace: Trace | None = None) -> SolutionSet:
    """Solution set in simplified coordinates.

    ``solve_projected`` maps the projected ``r``-variable problem to a
    :class:`SolutionSet` already expressed in its own coordinates.
    """
    trace = trace if trace is not None else Trace()
    n, r, p = data.n, data.r, data.p
    case = classification.case
    if case is PsdCase.PERFECT:
        fiber = classification.witness
        blocks = [QuadricSlice(_x0_basis(n, r), fiber)]
        if fiber.kind is FiberKind.SINGLE_POINT:
            blocks = [PinnedPoint(_x0_basis(n, r) @ fiber.representative())]
        return SolutionSet(0.0, True, np.zeros(n), blocks, sample_scale=cfg.sample_scale)
    if case is PsdCase.ESSENTIALLY_PERFECT:
        return SolutionSet.empty(0.0, n, approach=approach_path(data))

    reduced = solve_projected(classification.projected)
    if not reduced.attained:
        raise AssertionError("projected full-rank problem must attain its infimum")
    E1 = np.zeros((n, r))
    E1[:r, :] = np.eye(r)
    origin = E1 @ reduced.origin
    blocks = [blk.transformed(E1) for blk in reduced.blocks]
    if classification.branch is PsdBranch.S0_ZERO:
        blocks.append(AffineFree(_x0_basis(n, r)))
    else:
        origin[r + p:] = _centre(data)
        if p:
            E_y = np.zeros((n, p))
            E_y[r:r + p, :] = np.eye(p)
            blocks.append(AffineFree(E_y))
    trace.note(projected_infimum=reduced.infimum)
    return SolutionSet(reduced.infimum, True, origin, blocks, sample_scale=cfg.sample_scale)


def sublevel_fiber(data: SimplifiedFormData, cfg: SolverConfig = DEFAULT_CONFIG,
                   trace: Trace | None = None) -> FiberDescription | None:
    """``{x0 : Q(0, x0) <= 0}`` as a fibre, or ``None`` when it is empty."""
    trace = trace if trace is not None else Trace()
    k_scale, b_scale, _ = _data_scales(data)
    k1_tol = cfg.tol_class * k_scale
    c0_zero = trace.zero("c0_norm", float(np.linalg.norm(data.c0)), cfg.tol_class * b_scale)
    centre = _centre(data)
    if not c0_zero:
        return FiberDescription(FiberKind.SUBLEVEL, data.p, data.gamma0, centre, data.k1, data.c0.copy())
    trace.note(k1=data.k1)
    if np.any(data.gamma0 < 0):
        return FiberDescription(FiberKind.SUBLEVEL, data.p, data.gamma0, centre, data.k1)
    if data.k1 >= -k1_tol:
        return FiberDescription(FiberKind.SUBLEVEL, data.p, data.gamma0, centre, max(data.k1, 0.0))
    return None
