"""Solving regular dimension-reduced canonical forms.

The problem is ``min ||w - w0||^2`` subject to ``w' Delta w + 2 d'w = k*``
with ``w = (y, z_1, ..., z_q)``.  Stationary points of the Lagrangian solve
``[I - lam Delta] w = w0 + lam d``; along that path the constraint value is
the secular function

    f(lam) = sum_i gamma_i delta_i^2 / (1 - lam gamma_i)^2 + 2 eps^2 lam - k*,

nondecreasing on the admissible interval where ``I - lam Delta`` is positive
semi-definite.  The minimiser is an interior root of ``f`` (case A) or sits
at one of the interval's end points (cases B1 and Bq).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_CONFIG, SolverConfig
from .errors import BracketFailure, NotApplicable, PoleProximity
from .solution_sets import PinnedPoint, SignPair, SolutionSet, SphereFactor, Trace
from .transforms import CanonicalData, DrcfSpec


class LagrangianKind(str, enum.Enum):
    NON = "NonLagrangian"
    MULTIPLY = "MultiplyLagrangian"
    SINGLY = "SinglyLagrangian"


class Regime(str, enum.Enum):
    INTERIOR = "A"
    B1 = "B1"
    BQ = "Bq"
    ORIGIN = "origin"


@dataclass(frozen=True)
class ZeroFlags:
    delta: tuple
    epsilon: bool
    k_star: bool

    @property
    def delta_all(self) -> bool:
        return all(self.delta)


def zero_flags(drcf: DrcfSpec, cfg: SolverConfig = DEFAULT_CONFIG, trace: Trace | None = None) -> ZeroFlags:
    trace = trace if trace is not None else Trace()
    delta_scale, eps_scale, k_scale = drcf.tolerance_scales()
    tol = cfg.tol_class
    delta = tuple(trace.zero(f"delta_{i + 1}", d, tol * delta_scale) for i, d in enumerate(drcf.delta))
    epsilon = (not drcf.has_y) or trace.zero("epsilon", drcf.epsilon, tol * eps_scale)
    k_star = trace.zero("k_star", drcf.k_star, tol * k_scale)
    return ZeroFlags(delta, epsilon, k_star)


@dataclass(frozen=True, eq=False)
class SecularContext:
    drcf: DrcfSpec
    flags: ZeroFlags
    lambda_domain: tuple
    f_lo: float
    f_hi: float
    f1: float
    fq: float | None
    pole_guard: float = 1e-12
    # The same form with every value judged zero set to exactly zero; drives f and w(lam).
    effective: DrcfSpec | None = None

    @property
    def gammas(self):
        return self.drcf.gammas

    @property
    def hyperbolic(self) -> bool:
        return bool(self.drcf.gammas[-1] < 0)

    @property
    def constant(self) -> bool:
        return self.flags.delta_all and self.flags.epsilon

    def to_dict(self) -> dict:
        return {
            "lambda_domain": list(self.lambda_domain), "f_lo": self.f_lo, "f_hi": self.f_hi,
            "f1": self.f1, "fq": self.fq, "poles": (1.0 / self.gammas).tolist(),
        }


def _effective(drcf: DrcfSpec, flags: ZeroFlags):
    # Values judged zero are treated as exactly zero in every closed form.
    eff = drcf.with_zeros(flags.delta, flags.epsilon)
    return eff.delta, eff.epsilon


def boundary_values(drcf: DrcfSpec, which: str, flags: ZeroFlags):
    """``(y_hat, z_fixed, f_val)`` at ``lam = 1/gamma_1`` or ``1/gamma_q``."""
    gammas = drcf.gammas
    delta, eps = _effective(drcf, flags)
    j = 0 if which == "B1" else len(gammas) - 1
    g = gammas[j]
    others = np.arange(len(gammas)) != j
    z_fixed = delta[others] / (1.0 - gammas[others] / g)
    y_hat = eps / g
    f_val = float(np.sum(gammas[others] * z_fixed ** 2) + 2.0 * eps * y_hat - drcf.k_star)
    return y_hat, z_fixed, f_val


def make_context(drcf: DrcfSpec, cfg: SolverConfig = DEFAULT_CONFIG, trace: Trace | None = None) -> SecularContext:
    trace = trace if trace is not None else Trace()
    flags = zero_flags(drcf, cfg, trace)
    gammas = drcf.gammas
    hi = 1.0 / gammas[0]
    hyperbolic = gammas[-1] < 0
    lo = 1.0 / gammas[-1] if hyperbolic else -np.inf
    _, _, f1 = boundary_values(drcf, "B1", flags)
    fq = boundary_values(drcf, "Bq", flags)[2] if hyperbolic else None
    k_star = 0.0 if flags.k_star else drcf.k_star

    if flags.delta_all and flags.epsilon:
        f_lo = f_hi = -k_star
    else:
        f_hi = f1 if flags.delta[0] else np.inf
        if hyperbolic:
            f_lo = fq if flags.delta[-1] else -np.inf
        else:
            f_lo = -k_star if flags.epsilon else -np.inf
    trace.note(f_lo=f_lo, f_hi=f_hi)
    effective = drcf.with_zeros(flags.delta, flags.epsilon)
    return SecularContext(drcf, flags, (lo, hi), f_lo, f_hi, f1, fq,
                          pole_guard=cfg.tol_lambda, effective=effective)


def secular_f(ctx: SecularContext, lam: float) -> float:
    """The secular function at ``lam``, which must lie strictly inside the admissible interval."""
    lo, hi = ctx.lambda_domain
    guard_hi = ctx.pole_guard * max(1.0, abs(hi))
    if not lam < hi - guard_hi:
        raise PoleProximity(f"lambda={lam!r} is not below the pole 1/gamma_1={hi!r}")
    if np.isfinite(lo) and not lam > lo + ctx.pole_guard * max(1.0, abs(lo)):
        raise PoleProximity(f"lambda={lam!r} is not above the pole 1/gamma_q={lo!r}")
    return _f_unchecked(ctx, lam)


def _f_unchecked(ctx: SecularContext, lam: float) -> float:
    drcf = ctx.effective if ctx.effective is not None else ctx.drcf
    gammas = drcf.gammas
    gaps = 1.0 - lam * gammas
    return float(np.sum(gammas * drcf.delta ** 2 / gaps ** 2) + 2.0 * drcf.epsilon ** 2 * lam - drcf.k_star)


def secular_bounds(ctx: SecularContext) -> tuple[float, float]:
    return ctx.f_lo, ctx.f_hi


def stationary_point(drcf: DrcfSpec, lam: float) -> np.ndarray:
    """``w(lam) = [I - lam Delta]^{-1} (w0 + lam d)``."""
    z = drcf.delta / (1.0 - lam * drcf.gammas)
    if drcf.has_y:
        return np.r_[lam * drcf.epsilon, z]
    return z


@dataclass(frozen=True)
class LagrangianClass:
    kind: LagrangianKind
    margins: dict


def classify_lagrangian(ctx: SecularContext) -> LagrangianClass:
    flags = ctx.flags
    drcf = ctx.drcf
    margins = {"k_star": drcf.k_star, "min_delta": float(np.min(drcf.delta)),
               "max_delta": float(np.max(drcf.delta)), "epsilon": drcf.epsilon,
               "gamma_q": float(drcf.gammas[-1])}
    no_y = not drcf.has_y
    if no_y and flags.k_star and not flags.delta_all and not ctx.hyperbolic:
        kind = LagrangianKind.NON
    elif no_y and flags.k_star and flags.delta_all:
        kind = LagrangianKind.MULTIPLY
    else:
        kind = LagrangianKind.SINGLY
    return LagrangianClass(kind, margins)


@dataclass(frozen=True, eq=False)
class CaseASolution:
    lam: float
    w: np.ndarray
    residual: float
    width: float


def solve_case_A(ctx: SecularContext, cfg: SolverConfig = DEFAULT_CONFIG) -> CaseASolution | None:
    """Interior root of the secular function by bracketing and bisection.

    Returns ``None`` when the bounds rule out an interior root.
    """
    if not (ctx.f_lo < 0.0 < ctx.f_hi):
        return None
    lo_pole, hi_pole = ctx.lambda_domain
    tol_secular = cfg.tol_secular * (1.0 + abs(ctx.drcf.k_star))

    def f(lam):
        return _f_unchecked(ctx, lam)

    h0 = cfg.pole_guard * abs(hi_pole) + 1e-12
    h = h0
    hi = hi_pole - h
    while f(hi) <= 0.0:
        h /= 4.0
        hi = hi_pole - h
        if h < np.finfo(float).eps * max(1.0, abs(hi_pole)):
            raise BracketFailure("no positive secular value found below 1/gamma_1", f_at=f(hi), lam=hi)
    if np.isfinite(lo_pole):
        h = cfg.pole_guard * abs(lo_pole) + 1e-12
        lo = lo_pole + h
        while f(lo) >= 0.0:
            h /= 4.0
            lo = lo_pole + h
            if h < np.finfo(float).eps * max(1.0, abs(lo_pole)):
                raise BracketFailure("no negative secular value found above 1/gamma_q", f_at=f(lo), lam=lo)
        lo = min(lo, hi)
    else:
        step = 1.0
        lo = hi - step
        while f(lo) >= 0.0:
            step *= 2.0
            lo = hi - step
            if not np.isfinite(lo) or step > 1e300:
                raise BracketFailure("no negative secular value found on the unbounded side", lam=lo)

    f_lo, f_hi = f(lo), f(hi)
    while True:
        width = hi - lo
        if width <= cfg.tol_lambda * max(1.0, abs(lo), abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = f(mid)
        if f_mid == 0.0:
            lo = hi = mid
            f_lo = f_hi = 0.0
            break
        if f_mid < 0.0:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    lam, residual = (lo, f_lo) if abs(f_lo) <= abs(f_hi) else (hi, f_hi)
    if abs(residual) > tol_secular:
        # Steep near a pole: interpolate inside the final bracket, then keep the better point.
        if f_hi != f_lo:
            guess = lo - f_lo * (hi - lo) / (f_hi - f_lo)
            if lo <= guess <= hi and abs(f(guess)) < abs(residual):
                lam, residual = guess, f(guess)
    eff = ctx.effective if ctx.effective is not None else ctx.drcf
    return CaseASolution(lam, stationary_point(eff, lam), residual, hi - lo)


@dataclass(frozen=True, eq=False)
class BoundaryData:
    which: str
    y_hat: float
    z_fixed: np.ndarray
    f_val: float
    zeta: float

    def point(self, drcf: DrcfSpec, sign: float = 1.0) -> np.ndarray:
        j = 0 if self.which == "B1" else drcf.q - 1
        z = np.insert(self.z_fixed, j, sign * self.zeta)
        return np.r_[self.y_hat, z] if drcf.has_y else z


def solve_boundary(ctx: SecularContext, which: str) -> BoundaryData | None:
    """Solutions at an end point of the admissible interval, or ``None`` if there are none."""
    drcf = ctx.drcf
    if which == "Bq" and not ctx.hyperbolic:
        raise NotApplicable("the Bq end point exists only when gamma_q < 0")
    j = 0 if which == "B1" else drcf.q - 1
    if not ctx.flags.delta[j]:
        return None
    y_hat, z_fixed, f_val = boundary_values(drcf, which, ctx.flags)
    g = drcf.gammas[j]
    ratio = -f_val / g
    if ratio < 0.0:
        # Allow tiny negative values from rounding when f_val is numerically zero.
        if abs(f_val) <= 1e-12 * max(1.0, abs(drcf.k_star)):
            ratio = 0.0
        else:
            return None
    return BoundaryData(which, y_hat, z_fixed, f_val, float(np.sqrt(ratio)))


@dataclass(frozen=True, eq=False)
class DrcfOutcome:
    L_star: float
    w_hat: np.ndarray
    lagrangian: LagrangianClass
    regime: Regime
    context: SecularContext
    lam: float | None = None
    boundary: BoundaryData | None = None
    details: dict = field(default_factory=dict)

    @property
    def direct_loss(self) -> float:
        return self.context.drcf.loss(self.w_hat)


def _interior_loss(drcf: DrcfSpec, lam: float, lengths) -> float:
    gammas = drcf.gammas
    l0 = drcf.epsilon
    return float(lam ** 2 * (l0 ** 2 + np.sum(lengths ** 2 / (1.0 - lam * gammas) ** 2)))


def _boundary_loss(drcf: DrcfSpec, data: BoundaryData, lengths) -> float:
    gammas = drcf.gammas
    j = 0 if data.which == "B1" else drcf.q - 1
    lam = 1.0 / gammas[j]
    others = np.arange(drcf.q) != j
    inner = drcf.epsilon ** 2 + np.sum(lengths[others] ** 2 / (1.0 - lam * gammas[others]) ** 2)
    return float(lam ** 2 * inner + data.zeta ** 2)


def solve_drcf(drcf: DrcfSpec, cfg: SolverConfig = DEFAULT_CONFIG, trace: Trace | None = None) -> DrcfOutcome:
    trace = trace if trace is not None else Trace()
    ctx = make_context(drcf, cfg, trace)
    lag = classify_lagrangian(ctx)
    trace.add("lagrangian_class", lag.kind.value, **lag.margins)
    delta, _ = _effective(drcf, ctx.flags)
    lengths = delta * np.abs(drcf.gammas)
    zero_w = np.zeros(drcf.n_bar)

    if lag.kind is LagrangianKind.NON:
        return DrcfOutcome(float(np.sum(lengths ** 2 / drcf.gammas ** 2)), zero_w, lag, Regime.ORIGIN, ctx)
    if lag.kind is LagrangianKind.MULTIPLY:
        return DrcfOutcome(0.0, zero_w, lag, Regime.ORIGIN, ctx)

    if ctx.hyperbolic:
        if ctx.f_lo < 0.0 < ctx.f_hi:
            regime = Regime.INTERIOR
        elif ctx.f_hi <= 0.0:
            regime = Regime.B1
        else:
            regime = Regime.BQ
    else:
        regime = Regime.INTERIOR if ctx.f_hi > 0.0 else Regime.B1
    trace.add("solution_regime", regime.value, f_lo=ctx.f_lo, f_hi=ctx.f_hi)

    if regime is Regime.INTERIOR:
        sol = solve_case_A(ctx, cfg)
        if sol is None:
            raise BracketFailure("interior regime selected but the bounds exclude a root",
                                 f_lo=ctx.f_lo, f_hi=ctx.f_hi)
        L_star = _interior_loss(drcf, sol.lam, lengths)
        trace.note(lambda_hat=sol.lam, secular_residual=sol.residual)
        return DrcfOutcome(L_star, sol.w, lag, regime, ctx, lam=sol.lam,
                           details={"bracket_width": sol.width, "secular_residual": sol.residual})

    which = regime.value
    data = solve_boundary(ctx, which)
    if data is None:
        raise BracketFailure(f"boundary regime {which} selected but its solution set is empty",
                             f_lo=ctx.f_lo, f_hi=ctx.f_hi, f1=ctx.f1, fq=ctx.fq)
    L_star = _boundary_loss(drcf, data, lengths)
    j = 0 if which == "B1" else drcf.q - 1
    lam = 1.0 / drcf.gammas[j]
    return DrcfOutcome(L_star, data.point(drcf), lag, regime, ctx, lam=lam, boundary=data)


def lift_to_canonical(outcome: DrcfOutcome, data: CanonicalData,
                      cfg: SolverConfig = DEFAULT_CONFIG) -> SolutionSet:
    """Expand a reduced solution into canonical coordinates.

    Blocks whose target offset is positive are pinned to ``z_i e_1``; blocks
    with zero offset carry only the norm ``|z_i|`` and become a sign pair
    (size one) or a sphere.
    """
    drcf = outcome.context.drcf
    flags = outcome.context.flags
    n = data.n
    origin = np.zeros(n)
    blocks = []
    w = outcome.w_hat
    offset = 0
    if drcf.has_y:
        origin[data.block(0).start] = w[0]
        offset = 1
    for i in range(1, data.q + 1):
        sl = data.block(i)
        z = float(w[offset + i - 1])
        if not flags.delta[i - 1]:
            origin[sl.start] = z
            continue
        radius = abs(z)
        if radius == 0.0:
            continue
        m = sl.stop - sl.start
        basis = np.zeros((n, m))
        basis[sl, :] = np.eye(m)
        if m == 1:
            blocks.append(SignPair(basis[:, 0], radius))
        else:
            blocks.append(SphereFactor(basis, radius))
    if not blocks:
        blocks = [PinnedPoint(np.zeros(n))]
    return SolutionSet(outcome.L_star, True, origin, blocks, sample_scale=cfg.sample_scale)


def secular_curve(ctx: SecularContext, lo: float, hi: float, steps: int) -> list[tuple[float, float]]:
    """``(lam, f(lam))`` on an even grid, keeping only points inside the guarded interval."""
    if ctx.constant:
        raise NotApplicable("the secular function is constant for this problem")
    rows = []
    for lam in np.linspace(lo, hi, steps):
        try:
            rows.append((float(lam), secular_f(ctx, float(lam))))
        except PoleProximity:
            continue
    return rows
