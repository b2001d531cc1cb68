"""Brute-force reference minimiser for problems with at most three variables.

Independent of the analytic pipeline: a dense grid locates near-feasible
points, Newton steps along the constraint gradient put them on ``Q = 0``, and
projected gradient descent polishes them along the constraint surface.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoFeasiblePoints
from .problem import ProblemSpec, Sense

MAX_CANDIDATES = 256


@dataclass(frozen=True, eq=False)
class OracleResult:
    approx_infimum: float
    best_points: list
    resolution: int
    candidates: int
    cell: float

    def to_dict(self) -> dict:
        return {
            "approx_infimum": self.approx_infimum,
            "best_points": [p.tolist() for p in self.best_points],
            "resolution": self.resolution,
            "candidates": self.candidates,
            "cell": self.cell,
        }


def _q(problem, X):
    return np.einsum("ij,jk,ik->i", X, problem.B, X) + 2.0 * X @ problem.b - problem.k


def _grad_q(problem, X):
    return 2.0 * (X @ problem.B + problem.b)


def _loss(problem, X):
    D = X - problem.t
    return np.einsum("ij,jk,ik->i", D, problem.A, D)


def _grad_loss(problem, X):
    return 2.0 * (X - problem.t) @ problem.A


def _project(problem, X, iters=60):
    """Newton steps ``x <- x - Q grad / |grad|^2`` toward ``Q = 0``, row by row."""
    X = X.copy()
    q_scale = max(1.0, abs(problem.k))
    for _ in range(iters):
        q = _q(problem, X)
        g = _grad_q(problem, X)
        gg = np.einsum("ij,ij->i", g, g)
        active = (np.abs(q) > 1e-14 * q_scale) & (gg > 1e-300)
        if not active.any():
            break
        X[active] -= (q[active] / gg[active])[:, None] * g[active]
    return X


def _tangent(problem, X, G):
    N = _grad_q(problem, X)
    nn = np.einsum("ij,ij->i", N, N)
    safe = nn > 1e-300
    coef = np.where(safe, np.einsum("ij,ij->i", G, N) / np.where(safe, nn, 1.0), 0.0)
    return G - coef[:, None] * N


def _polish(problem, X, steps, bound, inequality):
    q_tol = 1e-10 * max(1.0, abs(problem.k))
    step = np.full(len(X), 0.1)
    L = _loss(problem, X)
    for _ in range(steps):
        G = _grad_loss(problem, X)
        q = _q(problem, X)
        interior = inequality & (q < -q_tol)
        D = np.where(interior[:, None], G, _tangent(problem, X, G))
        norms = np.linalg.norm(D, axis=1)
        moving = norms > 1e-10
        if not moving.any():
            break
        trial = X - step[:, None] * D
        if inequality:
            outside = _q(problem, trial) > 0.0
            trial[outside] = _project(problem, trial[outside])
        else:
            trial = _project(problem, trial)
        L_trial = _loss(problem, trial)
        q_trial = _q(problem, trial)
        feasible = (q_trial <= q_tol) if inequality else (np.abs(q_trial) <= 1e-8 * max(1.0, abs(problem.k)))
        ok = moving & feasible & (L_trial < L) & np.all(np.abs(trial) <= bound, axis=1)
        X[ok] = trial[ok]
        L[ok] = L_trial[ok]
        step = np.where(ok, step * 2.0, step * 0.5)
        step = np.maximum(step, 1e-18)
    return X, L


def brute_force_min(problem: ProblemSpec, grid_range: float = 10.0, resolution: int = 201,
                    feas_band: float | None = None, polish_steps: int = 200) -> OracleResult:
    """Approximate the global infimum over the box ``[-grid_range, grid_range]^n``.

    Grid points are kept when ``|Q|`` is within ``feas_band``; by default the
    band is three times the largest change of ``Q`` to an adjacent grid point.
    Distinct minima are returned one per cluster, clusters being separated by
    more than ten grid cells.
    """
    n = problem.n
    if n > 3:
        raise ValueError("the brute-force oracle supports at most three variables")
    inequality = problem.sense is Sense.LESS_EQUAL
    axis = np.linspace(-grid_range, grid_range, resolution)
    cell = float(axis[1] - axis[0])

    keep_X, keep_L = [], []
    # Chunk over the first axis to bound memory at high resolution.
    for first in np.array_split(axis, max(1, resolution // 16)):
        mesh = np.meshgrid(first, *([axis] * (n - 1)), indexing="ij")
        X = np.stack([m.ravel() for m in mesh], axis=1)
        q = _q(problem, X)
        if feas_band is None:
            grad = np.abs(_grad_q(problem, X))
            band = 3.0 * np.max(grad * cell + np.abs(np.diag(problem.B)) * cell ** 2, axis=1)
        else:
            band = feas_band
        accept = (q <= band) if inequality else (np.abs(q) <= band)
        if accept.any():
            keep_X.append(X[accept])
            keep_L.append(_loss(problem, X[accept]))
    if not keep_X:
        raise NoFeasiblePoints(f"no grid point within the feasibility band in [-{grid_range}, {grid_range}]^{n}")
    X = np.concatenate(keep_X)
    L = np.concatenate(keep_L)
    order = np.argsort(L, kind="stable")[:MAX_CANDIDATES]
    X = X[order]
    candidates = int(sum(len(x) for x in keep_X))

    if inequality:
        outside = _q(problem, X) > 0.0
        X[outside] = _project(problem, X[outside])
    else:
        X = _project(problem, X)
    inside = np.all(np.abs(X) <= grid_range, axis=1)
    q = _q(problem, X)
    q_ok = (q <= 1e-8 * max(1.0, abs(problem.k))) if inequality else (np.abs(q) <= 1e-8 * max(1.0, abs(problem.k)))
    X = X[inside & q_ok]
    if not len(X):
        raise NoFeasiblePoints("projection onto the constraint left the search box")
    X, L = _polish(problem, X, polish_steps, grid_range, inequality)

    best = float(np.min(L))
    close = L <= best + 1e-4 * max(1.0, best)
    reps = []
    for x in X[close][np.argsort(L[close], kind="stable")]:
        if all(np.linalg.norm(x - y) > 10.0 * cell for y in reps):
            reps.append(x)
    return OracleResult(best, reps, resolution, candidates, cell)


def grid_has_feasible_point(problem: ProblemSpec, grid_range: float = 10.0, resolution: int = 201,
                            band: float = 0.05) -> bool:
    """Whether any grid point has ``|Q| <= band`` or ``Q`` changes sign between neighbours."""
    n = problem.n
    axis = np.linspace(-grid_range, grid_range, resolution)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=1)
    q = _q(problem, X).reshape([resolution] * n)
    if np.any(np.abs(q) <= band):
        return True
    sign = np.sign(q)
    for ax in range(n):
        if np.any(np.diff(sign, axis=ax) != 0):
            return True
    return False
