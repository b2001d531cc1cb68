"""Solver tolerances."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class SolverConfig:
    """Numerical tolerances used by every tolerant branch of the solver.

    All tolerances are relative: they are multiplied by the scale of the
    quantity being tested (``max(1, |largest entry|)`` unless noted).
    """

    tol_rank: float = 1e-9
    tol_cluster: float = 1e-9
    tol_class: float = 1e-9
    tol_feas: float = 1e-8
    tol_secular: float = 1e-10
    tol_lambda: float = 1e-13
    pole_guard: float = 1e-3
    asym_tol: float = 1e-8
    cond_cap: float = 1e12
    jacobi_tol: float = 1e-14
    jacobi_max_sweeps: int = 100
    sample_scale: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"{f.name} must be strictly positive")

    def with_overrides(self, **overrides) -> "SolverConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_CONFIG = SolverConfig()
