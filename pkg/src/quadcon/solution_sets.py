"""Solution sets, their samplers, and the solve report.

A solution set is ``origin + sum of block contributions``, the blocks acting
on disjoint sets of coordinates in the frame where they were built.  Every
block contribution is linear in the block's parameters, so pulling a set
back through an affine map ``x = T x_g + a`` maps the origin affinely and
each block's basis linearly.  Uncountable sets (spheres, affine subspaces,
quadric fibres) are never enumerated; sampling is the only way to
materialise them.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotAttained
from .transforms import AffineMap, TransformChain


def _arr(v):
    return np.asarray(v, dtype=float)


@dataclass(frozen=True, eq=False)
class PinnedPoint:
    point: np.ndarray
    kind = "pinned_point"

    def transformed(self, T):
        return PinnedPoint(T @ self.point)

    def representative(self):
        return self.point

    def draw(self, rng, scale):
        return self.point

    def to_dict(self):
        return {"type": self.kind, "point": self.point.tolist()}


@dataclass(frozen=True, eq=False)
class SignPair:
    """The two points ``+magnitude * axis`` and ``-magnitude * axis``."""

    axis: np.ndarray
    magnitude: float
    kind = "sign_pair"

    def transformed(self, T):
        return SignPair(T @ self.axis, self.magnitude)

    def representative(self):
        return self.magnitude * self.axis

    def draw(self, rng, scale):
        return (1.0 if rng.random() < 0.5 else -1.0) * self.magnitude * self.axis

    def to_dict(self):
        return {"type": self.kind, "axis": self.axis.tolist(), "magnitude": self.magnitude}


@dataclass(frozen=True, eq=False)
class SphereFactor:
    """``radius * basis @ u`` for ``u`` on the unit sphere of ``R^m``."""

    basis: np.ndarray
    radius: float
    kind = "sphere_factor"

    def transformed(self, T):
        return SphereFactor(T @ self.basis, self.radius)

    def representative(self):
        return self.radius * self.basis[:, 0]

    def draw(self, rng, scale):
        u = rng.standard_normal(self.basis.shape[1])
        norm = np.linalg.norm(u)
        while norm == 0.0:
            u = rng.standard_normal(self.basis.shape[1])
            norm = np.linalg.norm(u)
        return self.radius * (self.basis @ (u / norm))

    def to_dict(self):
        return {"type": self.kind, "basis": self.basis.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class AffineFree:
    """``basis @ y`` for any ``y``; sampled as ``y ~ N(0, scale^2 I)``."""

    basis: np.ndarray
    kind = "affine_free"

    def transformed(self, T):
        return AffineFree(T @ self.basis)

    def representative(self):
        return np.zeros(self.basis.shape[0])

    def draw(self, rng, scale):
        return self.basis @ (scale * rng.standard_normal(self.basis.shape[1]))

    def to_dict(self):
        return {"type": self.kind, "basis": self.basis.tolist()}


@dataclass(frozen=True, eq=False)
class QuadricSlice:
    """``basis @ x0`` with ``x0`` drawn from a fibre description."""

    basis: np.ndarray
    fiber: object
    kind = "quadric_slice"

    def transformed(self, T):
        return QuadricSlice(T @ self.basis, self.fiber)

    def representative(self):
        return self.basis @ self.fiber.representative()

    def draw(self, rng, scale):
        return self.basis @ self.fiber.sample(rng, scale)

    def to_dict(self):
        return {"type": self.kind, "basis": self.basis.tolist(), "fiber": self.fiber.to_dict()}


@dataclass(frozen=True, eq=False)
class ApproachPath:
    """Feasible curve ``x(tau) = sum_j coeffs[j] * tau**j`` with loss ``loss_rate * tau**2``.

    Used when the infimum is zero but not attained: small ``tau`` gives
    feasible points of arbitrarily small loss.
    """

    coeffs: dict
    loss_rate: float

    def transformed(self, T, a):
        coeffs = {j: T @ c for j, c in self.coeffs.items()}
        coeffs[0] = coeffs.get(0, np.zeros(T.shape[0])) + a
        return ApproachPath(coeffs, self.loss_rate)

    def point(self, tau: float) -> np.ndarray:
        return sum(c * tau ** j for j, c in self.coeffs.items())

    def points(self, eta: float, count: int, seed: int = 0) -> list[np.ndarray]:
        rng = np.random.default_rng(seed)
        tau_max = np.sqrt(eta / self.loss_rate)
        taus = tau_max * (1.0 - rng.random(count))  # in (0, tau_max]
        return [self.point(tau) for tau in taus]


@dataclass(eq=False)
class SolutionSet:
    infimum: float
    attained: bool
    origin: np.ndarray
    blocks: list = field(default_factory=list)
    chain: TransformChain = field(default_factory=TransformChain)
    approach: ApproachPath | None = None
    sample_scale: float = 1.0

    def __post_init__(self):
        self.origin = _arr(self.origin)
        if not self.attained and self.blocks:
            raise ValueError("an unattained infimum carries no solution blocks")

    @property
    def dim(self) -> int:
        return self.origin.shape[0]

    @classmethod
    def point(cls, infimum, x) -> "SolutionSet":
        return cls(infimum, True, _arr(x))

    @classmethod
    def empty(cls, infimum, n, approach=None) -> "SolutionSet":
        return cls(infimum, False, np.zeros(n), [], approach=approach)

    @property
    def representative(self) -> np.ndarray | None:
        if not self.attained:
            return None
        x = self.origin + sum((blk.representative() for blk in self.blocks), np.zeros(self.dim))
        return self.chain.pull(x)

    @property
    def is_finite(self) -> bool:
        return all(isinstance(blk, (PinnedPoint, SignPair)) for blk in self.blocks)

    @property
    def cardinality(self) -> float:
        """Number of solutions (``inf`` for continua, 0 when not attained)."""
        if not self.attained:
            return 0
        count = 1
        for blk in self.blocks:
            if isinstance(blk, SignPair):
                count *= 2 if blk.magnitude > 0 else 1
            elif isinstance(blk, SphereFactor):
                if blk.radius > 0:
                    count = np.inf if blk.basis.shape[1] > 1 else count * 2
            elif isinstance(blk, (AffineFree, QuadricSlice)):
                count = np.inf
        return count

    def describe(self) -> str:
        if not self.attained:
            return "empty (infimum not attained)"
        kinds = [blk.kind for blk in self.blocks if not isinstance(blk, PinnedPoint)]
        if not kinds:
            return "single point"
        return " x ".join(kinds)

    def to_dict(self) -> dict:
        rep = self.representative
        return {
            "infimum": self.infimum,
            "attained": self.attained,
            "description": self.describe(),
            "representative": None if rep is None else rep.tolist(),
            "origin": self.origin.tolist(),
            "blocks": [blk.to_dict() for blk in self.blocks],
        }


def sample(sol: SolutionSet, count: int, seed: int = 0) -> list[np.ndarray]:
    """Draw ``count`` members of the set, mapped to original coordinates."""
    if not sol.attained:
        raise NotAttained("the infimum is not attained; use approach points instead")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        x = sol.origin.copy()
        for blk in sol.blocks:
            x = x + blk.draw(rng, sol.sample_scale)
        out.append(sol.chain.pull(x))
    return out


def approach_points(sol: SolutionSet, eta: float, count: int, seed: int = 0) -> list[np.ndarray]:
    """Feasible points with loss at most ``eta`` for a non-attained zero infimum."""
    if sol.approach is None:
        raise NotAttained("no approach path recorded for this set")
    return [sol.chain.pull(x) for x in sol.approach.points(eta, count, seed)]


def pull_back(sol: SolutionSet, chain: TransformChain | None = None) -> SolutionSet:
    """Map the set's geometry back through ``chain`` (default: the set's own chain).

    The infimum is unchanged; the result is expressed in the coordinates at
    the start of the chain and carries an empty chain.
    """
    if chain is None:
        chain = sol.chain
    elif len(sol.chain):
        raise ValueError("set already carries a pending chain")
    origin = sol.origin
    blocks = list(sol.blocks)
    approach = sol.approach
    for g in reversed(chain.maps):
        origin = g.T @ origin + g.a
        blocks = [blk.transformed(g.T) for blk in blocks]
        if approach is not None:
            approach = approach.transformed(g.T, g.a)
    return SolutionSet(sol.infimum, sol.attained, origin, blocks, TransformChain(),
                       approach, sol.sample_scale)


def embed(sol: SolutionSet, n: int, rows: slice | np.ndarray) -> SolutionSet:
    """Place a set living in a coordinate subspace into ``R^n`` (other coordinates zero)."""
    if len(sol.chain):
        sol = pull_back(sol)
    E = np.zeros((n, sol.dim))
    E[rows, :] = np.eye(sol.dim)
    blocks = [blk.transformed(E) for blk in sol.blocks]
    approach = sol.approach.transformed(E, np.zeros(n)) if sol.approach is not None else None
    return SolutionSet(sol.infimum, sol.attained, E @ sol.origin, blocks,
                       approach=approach, sample_scale=sol.sample_scale)


@dataclass(frozen=True)
class TraceEntry:
    stage: str
    choice: str
    margins: dict

    def to_dict(self):
        return {"stage": self.stage, "choice": self.choice, "margins": self.margins}


class Trace:
    """Records every tolerant decision with the value it was taken on."""

    AMBIGUITY = 1e3

    def __init__(self):
        self.entries: list[TraceEntry] = []
        self.warnings: list[str] = []
        self._pending: dict = {}

    def zero(self, name: str, value: float, tol: float) -> bool:
        """Tolerant test ``|value| <= tol``; flags values close to the threshold."""
        v = abs(float(value))
        self._pending[name] = float(value)
        if tol / self.AMBIGUITY < v <= tol * self.AMBIGUITY:
            self.warnings.append(
                f"{name}={float(value):.3g} lies within a factor {self.AMBIGUITY:g} of the "
                f"zero tolerance {tol:.3g}; classification may be unstable"
            )
        return v <= tol

    def note(self, **margins) -> None:
        self._pending.update({k: float(v) for k, v in margins.items()})

    def add(self, stage: str, choice: str, **margins) -> None:
        merged = dict(self._pending)
        merged.update({k: float(v) for k, v in margins.items()})
        self._pending = {}
        self.entries.append(TraceEntry(stage, choice, merged))

    def choice(self, stage: str) -> str | None:
        for entry in self.entries:
            if entry.stage == stage:
                return entry.choice
        return None


@dataclass(eq=False)
class SolveReport:
    outcome: SolutionSet
    trace: list[TraceEntry]
    warnings: list[str]
    details: dict = field(default_factory=dict)

    def stage(self, name: str) -> TraceEntry | None:
        for entry in self.trace:
            if entry.stage == name:
                return entry
        return None

    @property
    def labels(self) -> list[str]:
        return [f"{e.stage}:{e.choice}" for e in self.trace]

    def to_dict(self) -> dict:
        return _jsonable({
            "outcome": self.outcome.to_dict(),
            "trace": [e.to_dict() for e in self.trace],
            "warnings": list(self.warnings),
            "details": self.details,
        })


def _jsonable(obj):
    if isinstance(obj, dict):
        # Keys with a leading underscore hold live objects for in-process callers.
        return {str(k): _jsonable(v) for k, v in obj.items() if not str(k).startswith("_")}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if np.isfinite(f):
            return f
        return "inf" if f > 0 else ("-inf" if f < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, AffineMap):
        return {"T": _jsonable(obj.T), "a": _jsonable(obj.a), "label": obj.label}
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj
