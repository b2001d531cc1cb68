"""Dense symmetric-matrix primitives.

Everything downstream works from a :class:`Spectrum`: eigenvalues sorted in
descending order, an orthonormal eigenbasis, and the eigenvalues grouped into
clusters of numerically equal values.  The eigensolver is a cyclic Jacobi
iteration, which is accurate and dependency-free at the small dimensions this
package targets.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AsymmetricMatrix, ConvergenceError, DimensionMismatch, NonFiniteInput

JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100


def matrix_scale(values) -> float:
    """``max(1, max|v|)`` for an array of values."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 1.0
    return max(1.0, float(np.max(np.abs(values))))


def sym_matrix(values, asym_tol: float = 1e-8, name: str = "matrix") -> np.ndarray:
    """Ingest a square matrix as an exactly symmetric float array.

    The input is replaced by ``(M + M') / 2``; inputs whose asymmetry exceeds
    ``asym_tol * scale`` are rejected.
    """
    m = np.array(values, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteInput(f"{name} has non-finite entries")
    asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if asym > asym_tol * matrix_scale(m):
        raise AsymmetricMatrix(f"{name} is not symmetric (max asymmetry {asym:.3g})")
    m = 0.5 * (m + m.T)
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class Cluster:
    value: float
    multiplicity: int
    start: int
    stop: int

    @property
    def columns(self) -> slice:
        return slice(self.start, self.stop)


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    basis: np.ndarray
    clusters: list[Cluster] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def scale(self) -> float:
        return matrix_scale(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        return (self.basis * self.eigenvalues) @ self.basis.T


def _rotate(a: np.ndarray, v: np.ndarray, p: int, q: int) -> None:
    apq = a[p, q]
    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
    if abs(theta) > 1e150:
        t = 0.5 / theta
    else:
        t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
    c = 1.0 / np.sqrt(t * t + 1.0)
    s = t * c

    col_p = a[:, p].copy()
    col_q = a[:, q].copy()
    a[:, p] = c * col_p - s * col_q
    a[:, q] = s * col_p + c * col_q
    row_p = a[p, :].copy()
    row_q = a[q, :].copy()
    a[p, :] = c * row_p - s * row_q
    a[q, :] = s * row_p + c * row_q
    a[p, q] = a[q, p] = 0.0

    vp = v[:, p].copy()
    vq = v[:, q].copy()
    v[:, p] = c * vp - s * vq
    v[:, q] = s * vp + c * vq


def jacobi_eigh(
    s: np.ndarray,
    tol: float = JACOBI_TOL,
    max_sweeps: int = JACOBI_MAX_SWEEPS,
    name: str = "matrix",
) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigensolver for a symmetric matrix.

    Returns ``(eigenvalues, eigenvectors)`` unsorted.  Raises
    :class:`ConvergenceError` if the off-diagonal Frobenius norm is still above
    ``tol * max(1, ||S||_F)`` after ``max_sweeps`` sweeps.
    """
    a = np.array(s, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    threshold = tol * max(1.0, float(np.linalg.norm(a)))
    for _ in range(max_sweeps + 1):
        # Summed directly: subtracting the diagonal from ||a||_F cancels catastrophically.
        off = float(np.linalg.norm(a[~np.eye(n, dtype=bool)]))
        if off <= threshold:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] != 0.0:
                    _rotate(a, v, p, q)
    raise ConvergenceError(f"Jacobi iteration on {name} did not converge in {max_sweeps} sweeps")


def cluster_values(values, tol_cluster: float, scale: float | None = None) -> list[Cluster]:
    """Group descending-sorted values whose consecutive gaps are within ``tol_cluster * scale``."""
    values = np.asarray(values, dtype=float)
    if scale is None:
        scale = matrix_scale(values)
    clusters = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i - 1] - values[i] > tol_cluster * scale:
            members = values[start:i]
            clusters.append(Cluster(float(np.mean(members)), i - start, start, i))
            start = i
    return clusters


def _normalize_signs(basis: np.ndarray) -> np.ndarray:
    # Deterministic orientation: the largest-magnitude component of each column is positive.
    basis = basis.copy()
    for j in range(basis.shape[1]):
        i = int(np.argmax(np.abs(basis[:, j])))
        if basis[i, j] < 0:
            basis[:, j] = -basis[:, j]
    return basis


def spectral_decompose(
    s,
    tol_cluster: float = 1e-9,
    *,
    jacobi_tol: float = JACOBI_TOL,
    max_sweeps: int = JACOBI_MAX_SWEEPS,
    name: str = "matrix",
) -> Spectrum:
    s = np.asarray(s, dtype=float)
    if s.shape == (0, 0):
        return Spectrum(np.zeros(0), np.zeros((0, 0)), [])
    values, vectors = jacobi_eigh(s, tol=jacobi_tol, max_sweeps=max_sweeps, name=name)
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = _normalize_signs(vectors[:, order])
    clusters = cluster_values(values, tol_cluster)
    return Spectrum(values, vectors, clusters)


def numeric_rank(spec: Spectrum, tol_rank: float = 1e-9) -> int:
    return int(np.sum(np.abs(spec.eigenvalues) > tol_rank * spec.scale))


def null_mask(spec: Spectrum, tol_rank: float = 1e-9) -> np.ndarray:
    return np.abs(spec.eigenvalues) <= tol_rank * spec.scale


def mp_split(b_matrix, b, tol_rank: float = 1e-9, spec: Spectrum | None = None):
    """Split ``b = B x_b + b_perp`` with ``x_b = B^- b`` (Moore-Penrose).

    ``b_perp`` is the component of ``b`` in the numeric null space of ``B``.
    """
    b = np.asarray(b, dtype=float)
    if spec is None:
        spec = spectral_decompose(b_matrix)
    if spec.n != b.shape[0]:
        raise DimensionMismatch("matrix and vector dimensions disagree")
    zero = null_mask(spec, tol_rank)
    coords = spec.basis.T @ b
    inv = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, spec.eigenvalues))
    x_b = spec.basis @ (inv * coords)
    b_perp = spec.basis @ np.where(zero, coords, 0.0)
    return x_b, b_perp


def pinv_solve(spec: Spectrum, rhs, tol_rank: float = 1e-9) -> np.ndarray:
    """Moore-Penrose solve ``S^- rhs`` from a precomputed spectrum."""
    zero = null_mask(spec, tol_rank)
    coords = spec.basis.T @ np.asarray(rhs, dtype=float)
    inv = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, spec.eigenvalues))
    return spec.basis @ (inv * coords)


def householder_to(u: np.ndarray) -> np.ndarray:
    """Orthogonal (symmetric) matrix whose first column is the unit vector ``u``."""
    u = np.asarray(u, dtype=float)
    m = u.shape[0]
    e1 = np.zeros(m)
    e1[0] = 1.0
    w = e1 - u
    nw = float(np.linalg.norm(w))
    if nw < 1e-15:
        return np.eye(m)
    w /= nw
    return np.eye(m) - 2.0 * np.outer(w, w)
