"""Affine changes of coordinates and the chain of reductions built from them.

A map ``g = (T, a)`` sends ``x -> x_g = T^{-1}(x - a)`` and induces

    t_g = T^{-1}(t - a),  A_g = T'AT,  B_g = T'BT,
    b_g = T'(b + Ba),     k_g = k - a'(2b + Ba),

which leaves the loss and constraint values unchanged pointwise.  The
reductions below each return the transformed problem together with the map,
so that solutions can be carried back to the original coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .config import DEFAULT_CONFIG, SolverConfig
from .errors import NoPositiveEigenvalue, SingularTransform
from .linalg import (
    cluster_values,
    householder_to,
    matrix_scale,
    null_mask,
    spectral_decompose,
)
from .problem import ProblemSpec


@dataclass(frozen=True, eq=False)
class AffineMap:
    """``x -> T^{-1}(x - a)``; the inverse is ``x_g -> T x_g + a``."""

    T: np.ndarray
    a: np.ndarray
    label: str = ""

    @classmethod
    def identity(cls, n: int, label: str = "identity") -> "AffineMap":
        return cls(np.eye(n), np.zeros(n), label)

    @property
    def n(self) -> int:
        return self.T.shape[0]

    def forward(self, x) -> np.ndarray:
        return np.linalg.solve(self.T, np.asarray(x, dtype=float) - self.a)

    def inverse(self, x_g) -> np.ndarray:
        return self.T @ np.asarray(x_g, dtype=float) + self.a

    def then(self, other: "AffineMap") -> "AffineMap":
        """The map ``other o self`` (apply ``self`` first)."""
        return AffineMap(self.T @ other.T, self.a + self.T @ other.a,
                         f"{self.label}+{other.label}".strip("+"))


@dataclass
class TransformChain:
    """Maps applied left to right during reduction."""

    maps: list[AffineMap] = field(default_factory=list)

    def append(self, g: AffineMap) -> None:
        self.maps.append(g)

    def extend(self, other: "TransformChain") -> None:
        self.maps.extend(other.maps)

    def push(self, x) -> np.ndarray:
        for g in self.maps:
            x = g.forward(x)
        return np.asarray(x, dtype=float)

    def pull(self, x_g) -> np.ndarray:
        for g in reversed(self.maps):
            x_g = g.inverse(x_g)
        return np.asarray(x_g, dtype=float)

    def composite(self, n: int) -> AffineMap:
        total = AffineMap.identity(n, "")
        for g in self.maps:
            total = total.then(g)
        return total

    def __len__(self) -> int:
        return len(self.maps)


def apply_affine(problem: ProblemSpec, g: AffineMap, cfg: SolverConfig = DEFAULT_CONFIG) -> ProblemSpec:
    T = np.asarray(g.T, dtype=float)
    a = np.asarray(g.a, dtype=float)
    cond = np.linalg.cond(T) if T.size else 1.0
    if not np.isfinite(cond) or cond > cfg.cond_cap:
        raise SingularTransform(f"transform is singular or ill-conditioned (cond={cond:.3g})")
    A, B, t, b, k = problem.A, problem.B, problem.t, problem.b, problem.k
    A_g = T.T @ A @ T
    B_g = T.T @ B @ T
    return ProblemSpec(
        A=0.5 * (A_g + A_g.T),
        B=0.5 * (B_g + B_g.T),
        t=np.linalg.solve(T, t - a),
        b=T.T @ (b + B @ a),
        k=k - a @ (2.0 * b + B @ a),
        sense=problem.sense,
    )


def _decompose(matrix, cfg: SolverConfig, name: str):
    return spectral_decompose(matrix, cfg.tol_cluster, jacobi_tol=cfg.jacobi_tol,
                              max_sweeps=cfg.jacobi_max_sweeps, name=name)


def to_centred_ls(problem: ProblemSpec, cfg: SolverConfig = DEFAULT_CONFIG):
    """Centre on the target and whiten the range of ``A``.

    Returns ``(problem_g, g, residual)`` where ``problem_g`` has
    ``A = diag(I_r, O)`` and ``t = 0`` exactly, and ``residual`` is the
    max-norm discrepancy of the computed ``T'AT`` from that pattern.
    """
    spec = _decompose(problem.A, cfg, "A")
    n = problem.n
    zero = null_mask(spec, cfg.tol_rank)
    r = int(np.sum(~zero))
    scales = np.ones(n)
    scales[:r] = 1.0 / np.sqrt(spec.eigenvalues[:r])
    T = spec.basis * scales
    g = AffineMap(T, problem.t.copy(), "centred_ls")
    out = apply_affine(problem, g, cfg)
    A_exact = np.diag(np.r_[np.ones(r), np.zeros(n - r)])
    residual = float(np.max(np.abs(out.A - A_exact))) if n else 0.0
    out = out.replace(A=A_exact, t=np.zeros(n))
    return out, g, residual


@dataclass(frozen=True, eq=False)
class SimplifiedFormData:
    """Blocks of ``B`` for a centred least-squares problem in simplified form.

    Coordinates are ordered ``(x1, y0, z0)`` with ``x1`` the range of ``A``
    (dimension ``r``), ``y0`` the null space of ``B00`` (dimension
    ``n - r - s0``) and ``z0`` its range (dimension ``s0``)::

        B = [[B11,  C10, 0     ],
             [C10', 0,   0     ],
             [0,    0,   Gamma0]]
    """

    r: int
    s0: int
    B11: np.ndarray
    C10: np.ndarray
    gamma0: np.ndarray
    b1: np.ndarray
    c0: np.ndarray
    d0: np.ndarray
    k: float
    k1: float
    residual: float = 0.0

    @property
    def n(self) -> int:
        return self.r + self.C10.shape[1] + self.s0

    @property
    def p(self) -> int:
        """Dimension of ``y0``."""
        return self.C10.shape[1]

    def assemble_B(self) -> np.ndarray:
        r, p, s0 = self.r, self.p, self.s0
        B = np.zeros((r + p + s0, r + p + s0))
        B[:r, :r] = self.B11
        B[:r, r:r + p] = self.C10
        B[r:r + p, :r] = self.C10.T
        B[r + p:, r + p:] = np.diag(self.gamma0)
        return B

    def q1(self, x1) -> float:
        x1 = np.asarray(x1, dtype=float)
        return float(x1 @ self.B11 @ x1 + 2.0 * self.b1 @ x1 - self.k1)


def simplified_data(problem: ProblemSpec, r: int, s0: int, residual: float = 0.0) -> SimplifiedFormData:
    n = problem.n
    p = n - r - s0
    B, b = problem.B, problem.b
    gamma0 = np.diag(B[r + p:, r + p:]).copy()
    d0 = b[r + p:].copy()
    k1 = problem.k + float(np.sum(d0 * d0 / gamma0)) if s0 else problem.k
    return SimplifiedFormData(
        r=r, s0=s0, B11=B[:r, :r].copy(), C10=B[:r, r:r + p].copy(), gamma0=gamma0,
        b1=b[:r].copy(), c0=b[r:r + p].copy(), d0=d0, k=problem.k, k1=k1, residual=residual,
    )


def to_simplified_form(problem: ProblemSpec, r: int, cfg: SolverConfig = DEFAULT_CONFIG):
    """Bring a centred least-squares problem with ``r < n`` to simplified form.

    ``T = diag(I_r, U0) [[I, 0, 0], [0, I, 0], [-Gamma0^{-1} D10', 0, I]]``
    where ``B00 = U0 diag(O, Gamma0) U0'``.  Returns ``(problem_g, g, data)``.
    """
    n = problem.n
    B = problem.B
    B00 = B[r:, r:]
    spec = _decompose(B00, cfg, "B00")
    zero = null_mask(spec, cfg.tol_rank) if n > r else np.zeros(0, bool)
    # Null directions of B00 first, then its nonzero eigenvalues.
    order = np.r_[np.flatnonzero(zero), np.flatnonzero(~zero)].astype(int)
    U0 = spec.basis[:, order]
    s0 = int(np.sum(~zero))
    p = n - r - s0
    rotated = np.eye(n)
    rotated[r:, r:] = U0
    Brot = rotated.T @ B @ rotated
    gamma0 = np.diag(Brot[r + p:, r + p:]).copy()
    D10 = Brot[:r, r + p:]
    shear = np.eye(n)
    if s0:
        shear[r + p:, :r] = -(D10 / gamma0).T
    T = rotated @ shear
    g = AffineMap(T, np.zeros(n), "simplified_form")
    out = apply_affine(problem, g, cfg)

    Bs = out.B.copy()
    scale = matrix_scale(B)
    mask = np.zeros((n, n), bool)
    mask[r:, r:] = True
    mask[:r, r + p:] = True
    mask[r + p:, :r] = True
    target = np.zeros((n, n))
    target[r + p:, r + p:] = np.diag(np.diag(Bs[r + p:, r + p:]))
    residual = float(np.max(np.abs(Bs[mask] - target[mask]))) / scale if mask.any() else 0.0
    Bs[mask] = target[mask]
    out = out.replace(B=Bs, A=problem.A, t=np.zeros(n))
    return out, g, simplified_data(out, r, s0, residual)


def to_simultaneous_diagonal(problem: ProblemSpec, data: SimplifiedFormData,
                             cfg: SolverConfig = DEFAULT_CONFIG):
    """Diagonalise ``B11`` by ``T = diag(U1, I)`` while keeping simplified form.

    ``B11 = U1 diag(O, Gamma1) U1'`` with the null directions first and the
    nonzero eigenvalues in descending order; ``C10`` becomes ``U1' C10``.
    Returns ``(problem_g, g, data_g)``.
    """
    n, r = problem.n, data.r
    spec = _decompose(data.B11, cfg, "B11")
    zero = null_mask(spec, cfg.tol_rank)
    order = np.r_[np.flatnonzero(zero), np.flatnonzero(~zero)].astype(int)
    U1 = spec.basis[:, order]
    T = np.eye(n)
    T[:r, :r] = U1
    g = AffineMap(T, np.zeros(n), "simultaneous_diagonal")
    out = apply_affine(problem, g, cfg)
    Bs = out.B.copy()
    diag11 = np.where(zero[order], 0.0, spec.eigenvalues[order])
    Bs[:r, :r] = np.diag(diag11)
    # Structural zeros of the simplified form survive exactly.
    p = n - r - data.s0
    Bs[r:, r:] = 0.0
    Bs[:r, r + p:] = 0.0
    Bs[r + p:, :r] = 0.0
    Bs[r + p:, r + p:] = np.diag(data.gamma0)
    out = out.replace(B=Bs, A=problem.A, t=np.zeros(n))
    return out, g, simplified_data(out, r, data.s0, data.residual)


@dataclass(frozen=True, eq=False)
class CanonicalData:
    """Spectral data of ``B`` in canonical form.

    Canonical coordinates are ordered as the null block (size ``m0``)
    followed by one block per distinct nonzero eigenvalue
    ``gammas[0] > gammas[1] > ...`` with sizes ``mults``.
    """

    n: int
    s: int
    m0: int
    gammas: np.ndarray
    mults: np.ndarray
    lengths: np.ndarray  # l_0, l_1, ..., l_q
    delta: np.ndarray
    epsilon: float
    k: float
    k_star: float

    @property
    def q(self) -> int:
        return len(self.gammas)

    def block(self, i: int) -> slice:
        """Coordinates of block ``i`` (0 = null block, 1..q = eigenvalue blocks)."""
        if i == 0:
            return slice(0, self.m0)
        start = self.m0 + int(np.sum(self.mults[: i - 1]))
        return slice(start, start + int(self.mults[i - 1]))

    def canonical_problem(self) -> ProblemSpec:
        n = self.n
        diag = np.zeros(n)
        t = np.zeros(n)
        b = np.zeros(n)
        for i in range(1, self.q + 1):
            sl = self.block(i)
            diag[sl] = self.gammas[i - 1]
            t[sl.start] = self.delta[i - 1]
        if self.m0:
            b[0] = self.epsilon
        return ProblemSpec(A=np.eye(n), B=np.diag(diag), t=t, b=b, k=self.k_star)


def to_canonical_form(problem: ProblemSpec, cfg: SolverConfig = DEFAULT_CONFIG):
    """Euclidean reduction of a centred full least-squares problem to canonical form.

    Requires ``A = I``, ``t = 0`` and ``B`` with a positive eigenvalue.
    Returns ``(problem_star, g, data)``; ``problem_star`` is assembled from
    ``data`` so its zero pattern is exact.
    """
    n = problem.n
    B, b = problem.B, problem.b
    spec = _decompose(B, cfg, "B")
    zero = null_mask(spec, cfg.tol_rank)
    if not np.any(spec.eigenvalues[~zero] > 0):
        raise NoPositiveEigenvalue("canonical form needs B with a positive eigenvalue; negate the constraint first")
    null_idx = np.flatnonzero(zero)
    nz_idx = np.flatnonzero(~zero)  # already in descending order
    clusters = cluster_values(spec.eigenvalues[nz_idx], cfg.tol_cluster, spec.scale)

    TB = spec.basis[:, np.r_[null_idx, nz_idx].astype(int)]
    coords = TB.T @ b
    m0 = len(null_idx)
    blocks = [slice(0, m0)] + [slice(m0 + c.start, m0 + c.stop) for c in clusters]
    gammas = np.array([c.value for c in clusters])
    mults = np.array([c.multiplicity for c in clusters], dtype=int)

    UB = np.eye(n)
    lengths = np.zeros(len(blocks))
    shift = np.zeros(n)
    for i, sl in enumerate(blocks):
        piece = coords[sl]
        length = float(np.linalg.norm(piece))
        lengths[i] = length
        if length > 0.0:
            # Sign chosen so the target coordinate delta_i comes out nonnegative.
            sign = 1.0 if i == 0 or gammas[i - 1] > 0 else -1.0
            UB[sl, sl] = householder_to(sign * piece / length)
        if i > 0:
            shift[sl] = piece / gammas[i - 1]

    T = TB @ UB
    a = -TB @ shift
    g = AffineMap(T, a, "canonical_form")
    delta = lengths[1:] / np.abs(gammas)
    k_star = problem.k + float(np.sum(lengths[1:] ** 2 / gammas))
    data = CanonicalData(
        n=n, s=n - m0, m0=m0, gammas=gammas, mults=mults, lengths=lengths,
        delta=delta, epsilon=float(lengths[0]), k=problem.k, k_star=k_star,
    )
    return data.canonical_problem(), g, data


@dataclass(frozen=True, eq=False)
class DrcfSpec:
    """Dimension-reduced canonical form: minimise ``||w - w0||^2`` s.t. ``w'Dw + 2d'w = k*``.

    ``has_y`` marks the leading null-space variable ``y`` (present only when
    ``m0 > 0`` and ``epsilon > 0``).  ``dropped_null`` records that a null
    block with ``epsilon = 0`` was removed, in which case ``y = 0`` is optimal.
    """

    gammas: np.ndarray
    delta: np.ndarray
    epsilon: float
    k_star: float
    has_y: bool
    dropped_null: bool = False
    regular: bool = True
    scale: float = 1.0

    @property
    def q(self) -> int:
        return len(self.gammas)

    @property
    def n_bar(self) -> int:
        return self.q + int(self.has_y)

    @property
    def Delta(self) -> np.ndarray:
        return np.diag(np.r_[[0.0] * self.has_y, self.gammas])

    @property
    def w0(self) -> np.ndarray:
        return np.r_[[0.0] * self.has_y, self.delta]

    @property
    def d(self) -> np.ndarray:
        d = np.zeros(self.n_bar)
        if self.has_y:
            d[0] = self.epsilon
        return d

    def loss(self, w) -> float:
        w = np.asarray(w, dtype=float)
        return float(np.sum((w - self.w0) ** 2))

    def constraint(self, w) -> float:
        w = np.asarray(w, dtype=float)
        return float(w @ self.Delta @ w + 2.0 * self.d @ w - self.k_star)

    def tolerance_scales(self) -> tuple[float, float, float]:
        """Magnitudes against which ``delta``, ``epsilon`` and ``k*`` are judged zero.

        Each is measured in its own units: coordinates for ``delta``, linear
        coefficients for ``epsilon`` and constraint values for ``k*``.
        """
        lengths = np.abs(self.gammas) * self.delta
        delta_scale = max(1.0, float(np.max(self.delta, initial=0.0)))
        eps_scale = max(1.0, self.epsilon, float(np.max(lengths, initial=0.0)))
        k_scale = max(1.0, abs(self.k_star), float(np.max(lengths * self.delta, initial=0.0)))
        return delta_scale, eps_scale, k_scale

    def with_zeros(self, delta_zero, epsilon_zero: bool) -> "DrcfSpec":
        """Copy with the flagged ``delta_i`` (and optionally ``epsilon``) set to exactly zero."""
        delta = np.where(np.asarray(delta_zero, dtype=bool), 0.0, self.delta)
        epsilon = 0.0 if epsilon_zero else self.epsilon
        return replace(self, delta=delta, epsilon=epsilon)

    @classmethod
    def from_values(cls, gammas, delta, epsilon=0.0, k_star=0.0, has_y=None):
        gammas = np.asarray(gammas, dtype=float)
        if has_y is None:
            has_y = epsilon > 0
        return cls(gammas=gammas, delta=np.asarray(delta, dtype=float), epsilon=float(epsilon),
                   k_star=float(k_star), has_y=bool(has_y),
                   scale=max(1.0, float(np.max(np.abs(gammas))), abs(float(k_star))))


def dimension_reduce(data: CanonicalData, cfg: SolverConfig = DEFAULT_CONFIG) -> DrcfSpec:
    scale = max(1.0, float(np.max(data.lengths)))
    eps_zero = data.epsilon <= cfg.tol_class * scale
    has_y = data.m0 > 0 and not eps_zero
    return DrcfSpec(
        gammas=data.gammas.copy(), delta=data.delta.copy(),
        epsilon=data.epsilon if has_y else 0.0, k_star=data.k_star,
        has_y=has_y, dropped_null=data.m0 > 0 and eps_zero, regular=True, scale=scale,
    )
