"""Public entry points: equality and inequality solves with a full report."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .canonical import lift_to_canonical, solve_drcf
from .config import DEFAULT_CONFIG, SolverConfig
from .errors import InfeasibleConstraint
from .linalg import matrix_scale, spectral_decompose
from .problem import (
    ProblemSpec,
    Sense,
    constraint_scale,
    eval_constraint,
    eval_loss,
    feasibility_check,
    negate_constraint,
    sublevel_nonempty,
    validate,
)
from .psd import PsdCase, classify_psd, solve_psd, sublevel_fiber
from .solution_sets import (
    AffineFree,
    PinnedPoint,
    QuadricSlice,
    SolutionSet,
    SolveReport,
    Trace,
    approach_points,
    pull_back,
    sample,
)
from .transforms import (
    TransformChain,
    dimension_reduce,
    to_canonical_form,
    to_centred_ls,
    to_simplified_form,
    to_simultaneous_diagonal,
)

_CASE_NAMES = {
    "I": "case I: B = O, b has no null-space part, and k_plus != 0",
    "II": "case II: B nonsingular and -k_plus B positive definite",
    "III": "case III: B singular nonzero, b in range(B), k_plus != 0, k_plus B has no positive eigenvalue",
    "LE": "the sublevel set {x : Q(x) <= 0} is empty",
}


@dataclass(eq=False)
class SolveOutcome:
    report: SolveReport

    @property
    def solution_set(self) -> SolutionSet:
        return self.report.outcome

    @property
    def infimum(self) -> float:
        return self.report.outcome.infimum

    @property
    def attained(self) -> bool:
        return self.report.outcome.attained

    @property
    def representative(self):
        return self.report.outcome.representative

    @property
    def trace(self):
        return self.report.trace

    @property
    def warnings(self):
        return self.report.warnings

    @property
    def details(self) -> dict:
        return self.report.details

    def sample(self, count: int, seed: int = 0):
        return sample(self.report.outcome, count, seed)

    def approach_points(self, eta: float, count: int, seed: int = 0):
        return approach_points(self.report.outcome, eta, count, seed)

    def to_dict(self) -> dict:
        return self.report.to_dict()


def _raise_infeasible(case: str) -> None:
    raise InfeasibleConstraint(case, f"constraint has no solution ({_CASE_NAMES[case]})")


def solve(problem: ProblemSpec, cfg: SolverConfig = DEFAULT_CONFIG) -> SolveOutcome:
    """Global minimiser of ``(x-t)'A(x-t)`` on ``{x'Bx + 2b'x - k = 0}`` (or ``<= 0``)."""
    if problem.sense is Sense.LESS_EQUAL:
        return solve_inequality(problem, cfg)
    trace = Trace()
    details: dict = {}
    r = _validate(problem, cfg, trace, details)
    feas = feasibility_check(problem.B, problem.b, problem.k, cfg)
    trace.add("feasibility", feas.verdict.value if feas.case is None else f"infeasible_{feas.case}",
              **feas.margins)
    details["feasibility"] = {"k_plus": feas.k_plus, "b_perp": feas.b_perp, "case": feas.case}
    if not feas.feasible:
        _raise_infeasible(feas.case)
    sol = _solve_equality(problem, r, cfg, trace, details)
    return _finish(problem, sol, trace, details, cfg)


def _validate(problem, cfg, trace, details) -> int:
    val = validate(problem, cfg)
    eig = val.spectrum.eigenvalues
    scale = val.spectrum.scale
    # Gap between the smallest retained and the largest discarded eigenvalue of A.
    kept = eig[: val.r]
    dropped = eig[val.r:]
    trace.add("validate", f"rank={val.r}", smallest_kept=float(kept[-1]) / scale,
              largest_dropped=float(np.max(np.abs(dropped))) / scale if dropped.size else 0.0)
    details["rank"] = val.r
    details["n"] = val.n
    return val.r


def _solve_equality(problem: ProblemSpec, r: int, cfg, trace, details) -> SolutionSet:
    centred, g0, residual = to_centred_ls(problem, cfg)
    trace.add("centred_ls", "full" if r == problem.n else "partial", residual=residual)
    details["centred"] = centred.to_dict()
    inner = _solve_centred(centred, r, cfg, trace, details, problem.scale)
    return pull_back(inner, TransformChain([g0]))


def _solve_centred(problem: ProblemSpec, r: int, cfg, trace, details, scale: float) -> SolutionSet:
    n = problem.n
    B_max = float(np.max(np.abs(problem.B))) if n else 0.0
    if trace.zero("B_max", B_max, cfg.tol_rank * scale):
        trace.add("constraint_form", "affine")
        return affine_constraint_solve(problem, r, cfg, trace, details, scale)
    trace.add("constraint_form", "quadratic")
    if r < n:
        return _solve_psd_branch(problem, r, cfg, trace, details)
    return _solve_full_rank(problem, cfg, trace, details)


def _solve_psd_branch(problem: ProblemSpec, r: int, cfg, trace, details) -> SolutionSet:
    simplified, g1, data = to_simplified_form(problem, r, cfg)
    trace.add("simplified_form", f"s0={data.s0}", residual=data.residual)
    diagonal, g2, data = to_simultaneous_diagonal(simplified, data, cfg)
    trace.add("simultaneous_diagonal", f"r={r}")
    cls = classify_psd(data, cfg, trace)
    details["simplified"] = diagonal.to_dict()
    details["psd"] = {
        "case": cls.case.value, "branch": cls.branch.value, "s0": data.s0, "k1": data.k1,
        "c0": data.c0, "d0": data.d0, "gamma0": data.gamma0, "C10": data.C10,
        "witness": cls.witness, "margins": cls.margins,
    }

    def solve_projected(projected: ProblemSpec) -> SolutionSet:
        feas = feasibility_check(projected.B, projected.b, projected.k, cfg)
        trace.add("projected_feasibility", feas.verdict.value, **feas.margins)
        details["projected"] = projected.to_dict()
        return _solve_centred(projected, projected.n, cfg, trace, details, projected.scale)

    sol = solve_psd(data, cls, solve_projected, cfg, trace)
    if cls.case is PsdCase.ESSENTIALLY_PERFECT:
        trace.add("attainment", "not_attained", infimum=0.0)
    return pull_back(sol, TransformChain([g1, g2]))


def _solve_full_rank(problem: ProblemSpec, cfg, trace, details) -> SolutionSet:
    positive = _has_positive_eigenvalue(problem, cfg)
    if not positive:
        problem = negate_constraint(problem)
    trace.add("sign_normalisation", "negated" if not positive else "kept")
    star, g, data = to_canonical_form(problem, cfg)
    trace.add("canonical_form", f"q={data.q},m0={data.m0}", k_star=data.k_star, epsilon=data.epsilon,
              min_delta=float(np.min(data.delta)))
    drcf = dimension_reduce(data, cfg)
    shape = "with_y" if drcf.has_y else ("null_dropped" if drcf.dropped_null else "no_null")
    trace.add("dimension_reduce", shape, n_bar=drcf.n_bar)
    outcome = solve_drcf(drcf, cfg, trace)
    details["canonical"] = {
        "B": star.B, "t": star.t, "b": star.b, "gammas": data.gammas, "mults": data.mults,
        "lengths": data.lengths, "delta": data.delta, "epsilon": data.epsilon,
        "k_star": data.k_star, "m0": data.m0,
    }
    details["drcf"] = {
        "class": outcome.lagrangian.kind.value, "regime": outcome.regime.value,
        "lambda_hat": outcome.lam, "f_lo": outcome.context.f_lo, "f_hi": outcome.context.f_hi,
        "L_star": outcome.L_star, "direct_loss": outcome.direct_loss, "w_hat": outcome.w_hat,
        **outcome.details,
    }
    details["_drcf_outcome"] = outcome
    lifted = lift_to_canonical(outcome, data, cfg)
    return pull_back(lifted, TransformChain([g]))


def _has_positive_eigenvalue(problem: ProblemSpec, cfg) -> bool:
    spec = spectral_decompose(problem.B, cfg.tol_cluster, jacobi_tol=cfg.jacobi_tol,
                              max_sweeps=cfg.jacobi_max_sweeps, name="B")
    return bool(spec.eigenvalues[0] > cfg.tol_rank * spec.scale)


def _x0_basis(n: int, r: int) -> np.ndarray:
    E = np.zeros((n, n - r))
    E[r:, :] = np.eye(n - r)
    return E


def _orthogonal_complement(v: np.ndarray) -> np.ndarray:
    # Columns spanning the orthogonal complement of v, from a full SVD.
    _, _, vt = np.linalg.svd(v.reshape(1, -1))
    return vt[1:].T


def affine_constraint_solve(problem: ProblemSpec, r: int, cfg: SolverConfig = DEFAULT_CONFIG,
                            trace: Trace | None = None, details: dict | None = None,
                            scale: float | None = None) -> SolutionSet:
    """Centred problem with ``B = O``: minimise ``||x1||^2`` subject to ``2 b'x = k``."""
    trace = trace if trace is not None else Trace()
    details = details if details is not None else {}
    scale = problem.scale if scale is None else scale
    n = problem.n
    b, k = problem.b, problem.k
    tol = cfg.tol_class * scale
    b_zero = trace.zero("b_norm", float(np.linalg.norm(b)), tol)
    if b_zero:
        if not trace.zero("k", k, tol):
            _raise_infeasible("I")
        trace.add("affine_solve", "unconstrained")
        blocks = [AffineFree(_x0_basis(n, r))] if r < n else []
        return SolutionSet(0.0, True, np.zeros(n), blocks, sample_scale=cfg.sample_scale)

    if r == n:
        x = k * b / (2.0 * float(b @ b))
        trace.add("affine_solve", "full_rank")
        return SolutionSet(float(x @ x), True, x)

    b1, b0 = b[:r], b[r:]
    b0_zero = trace.zero("b0_norm", float(np.linalg.norm(b0)), tol)
    if not b0_zero:
        trace.add("affine_solve", "perfect")
        x0 = k * b0 / (2.0 * float(b0 @ b0))
        origin = np.r_[np.zeros(r), x0]
        blocks = []
        if n - r > 1:
            complement = _orthogonal_complement(b0)
            E = np.zeros((n, complement.shape[1]))
            E[r:, :] = complement
            blocks.append(AffineFree(E))
        else:
            blocks.append(PinnedPoint(np.zeros(n)))
        return SolutionSet(0.0, True, origin, blocks, sample_scale=cfg.sample_scale)
    trace.add("affine_solve", "projected")
    x1 = k * b1 / (2.0 * float(b1 @ b1))
    origin = np.r_[x1, np.zeros(n - r)]
    return SolutionSet(float(x1 @ x1), True, origin, [AffineFree(_x0_basis(n, r))],
                       sample_scale=cfg.sample_scale)


def solve_inequality(problem: ProblemSpec, cfg: SolverConfig = DEFAULT_CONFIG) -> SolveOutcome:
    """Minimise on ``{x : Q(x) <= 0}``."""
    problem = problem.replace(sense=Sense.LESS_EQUAL)
    trace = Trace()
    details: dict = {}
    r = _validate(problem, cfg, trace, details)
    nonempty, inf_q = sublevel_nonempty(problem.B, problem.b, problem.k, cfg)
    trace.add("sublevel_feasibility", "nonempty" if nonempty else "empty", inf_q=inf_q)
    if not nonempty:
        _raise_infeasible("LE")
    n = problem.n
    centred, g0, residual = to_centred_ls(problem, cfg)
    trace.add("centred_ls", "full" if r == n else "partial", residual=residual)
    details["centred"] = centred.to_dict()

    if r == n:
        q_at_target = -centred.k
        inside = q_at_target <= cfg.tol_feas * max(1.0, abs(centred.k))
        trace.add("inequality_branch", "target_feasible" if inside else "effectively_equivalent",
                  q_at_target=q_at_target)
        if inside:
            sol = pull_back(SolutionSet(0.0, True, np.zeros(n)), TransformChain([g0]))
            return _finish(problem, sol, trace, details, cfg)
    else:
        simplified, g1, data = to_simplified_form(centred, r, cfg)
        fiber = sublevel_fiber(data, cfg, trace)
        trace.add("inequality_branch", "target_fiber" if fiber is not None else "effectively_equivalent",
                  k1=data.k1)
        if fiber is not None:
            details["sublevel_fiber"] = fiber
            inner = SolutionSet(0.0, True, np.zeros(n), [QuadricSlice(_x0_basis(n, r), fiber)],
                                sample_scale=cfg.sample_scale)
            sol = pull_back(inner, TransformChain([g0, g1]))
            return _finish(problem, sol, trace, details, cfg)

    equality = solve(problem.replace(sense=Sense.EQUALITY), cfg)
    merged = trace.entries + equality.report.trace
    warnings = trace.warnings + equality.report.warnings
    details.update(equality.report.details)
    report = SolveReport(equality.solution_set, merged, warnings, details)
    return SolveOutcome(report)


def _finish(problem: ProblemSpec, sol: SolutionSet, trace: Trace, details: dict, cfg) -> SolveOutcome:
    rep = sol.representative
    if rep is not None:
        q_val = eval_constraint(problem, rep)
        loss = eval_loss(problem, rep)
        q_tol = cfg.tol_feas * constraint_scale(problem, rep)
        feasible = q_val <= q_tol if problem.sense is Sense.LESS_EQUAL else abs(q_val) <= q_tol
        loss_gap = abs(loss - sol.infimum)
        details["verification"] = {"constraint": q_val, "loss": loss, "loss_gap": loss_gap}
        if not feasible:
            trace.warnings.append(f"representative violates the constraint by {q_val:.3g}")
        if loss_gap > cfg.tol_feas * max(1.0, sol.infimum, matrix_scale(problem.A)):
            trace.warnings.append(f"representative loss differs from the infimum by {loss_gap:.3g}")
    report = SolveReport(sol, list(trace.entries), list(trace.warnings), details)
    return SolveOutcome(report)
