import json

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from quadcon import (
    InfeasibleConstraint,
    ProblemSpec,
    Sense,
    SolverConfig,
    affine_constraint_solve,
    eval_constraint,
    eval_loss,
    solve,
    solve_inequality,
)
from quadcon.errors import NonConvexObjective
from quadcon.problem import constraint_scale
from quadcon.solution_sets import Trace

from conftest import sphere, worked_example


def test_report_trace_names_every_decision():
    out = solve(worked_example(1.5))
    assert out.report.labels[:2] == ["validate:rank=3", "feasibility:feasible"]
    assert out.trace[-1].stage == "solution_regime"
    assert out.details["verification"]["loss_gap"] < 1e-12
    assert out.warnings == []


def test_json_report_is_deterministic():
    a = json.dumps(solve(worked_example(1.5)).to_dict())
    b = json.dumps(solve(worked_example(1.5)).to_dict())
    assert a == b


@pytest.mark.parametrize(
    "b, k, r, choice, infimum",
    [
        ([0.0, 0.0], 0.0, 2, "unconstrained", 0.0),
        ([1.0, 1.0], 4.0, 2, "full_rank", 2.0),
        ([0.0, 2.0], 4.0, 1, "perfect", 0.0),
        ([2.0, 0.0], 4.0, 1, "projected", 1.0),
    ],
)
def test_affine_constraint_branches(b, k, r, choice, infimum):
    A = np.diag([1.0] * r + [0.0] * (2 - r))
    problem = ProblemSpec(A, np.zeros((2, 2)), np.zeros(2), b, k)
    trace = Trace()
    sol = affine_constraint_solve(problem, r, trace=trace)
    assert trace.choice("affine_solve") == choice
    assert sol.infimum == pytest.approx(infimum)
    x = sol.representative
    assert eval_constraint(problem, x) == pytest.approx(0.0, abs=1e-12)


def test_linear_constraint_through_solve():
    problem = ProblemSpec(np.diag([1.0, 4.0]), np.zeros((2, 2)), [1.0, 1.0], [1.0, 0.0], 0.0)
    out = solve(problem)
    np.testing.assert_allclose(out.representative, [0.0, 1.0])
    assert out.infimum == pytest.approx(1.0)


def test_infeasible_error_names_case():
    with pytest.raises(InfeasibleConstraint) as info:
        solve(ProblemSpec(np.eye(2), np.eye(2), np.zeros(2), np.zeros(2), -1.0))
    assert info.value.case == "II"
    assert "case II" in str(info.value)


def test_non_convex_objective_rejected():
    with pytest.raises(NonConvexObjective):
        solve(ProblemSpec(np.diag([1.0, -1.0]), np.eye(2), np.zeros(2), np.zeros(2), 1.0))


def test_negative_definite_constraint_is_normalised():
    # Same set as the unit circle, written with the opposite sign.
    problem = ProblemSpec(np.eye(2), -np.eye(2), [2.0, 0.0], np.zeros(2), -1.0)
    out = solve(problem)
    assert out.trace[[e.stage for e in out.trace].index("sign_normalisation")].choice == "negated"
    np.testing.assert_allclose(out.representative, [1.0, 0.0], atol=1e-12)


def test_config_override_changes_classification():
    # x1^2 + 2e-7 x0 = -1: the tiny linear term is what makes the constraint solvable.
    problem = ProblemSpec(np.diag([1.0, 0.0]), np.array([[1.0, 0.0], [0.0, 0.0]]), np.zeros(2),
                          [0.0, 1e-7], -1.0)
    assert solve(problem).details["psd"]["case"] == "Perfect"
    with pytest.raises(InfeasibleConstraint) as info:
        solve(problem, SolverConfig(tol_class=1e-5))
    assert info.value.case == "III"


def test_inequality_interior_and_sublevel_empty():
    disc = ProblemSpec(np.eye(2), np.eye(2), [0.1, 0.1], np.zeros(2), 1.0, Sense.LESS_EQUAL)
    assert solve_inequality(disc).infimum == 0.0
    with pytest.raises(InfeasibleConstraint) as info:
        solve(disc.replace(k=-1.0))
    assert info.value.case == "LE"


def test_inequality_with_indefinite_constraint_delegates():
    problem = ProblemSpec(np.eye(2), np.diag([-1.0, 0.0]), [0.0, 0.0], np.zeros(2), -1.0, Sense.LESS_EQUAL)
    out = solve(problem)
    assert out.infimum == pytest.approx(1.0)
    assert "inequality_branch:effectively_equivalent" in out.report.labels


def _planted(seed, n):
    rng = np.random.default_rng(seed)
    R = rng.normal(size=(n, n))
    M = rng.normal(size=(n, n))
    B = M + M.T
    b = rng.normal(size=n)
    x0 = rng.normal(size=n)
    return ProblemSpec(R @ R.T + 0.1 * np.eye(n), B, rng.normal(size=n), b, float(x0 @ B @ x0 + 2 * b @ x0)), x0, rng


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_solution_beats_random_feasible_points(seed, n):
    problem, x0, rng = _planted(seed, n)
    out = solve(problem)
    assert out.attained
    L = out.infimum
    assert L <= eval_loss(problem, x0) + 1e-9 * max(1.0, L)
    for x in out.sample(5, seed=seed):
        assert abs(eval_constraint(problem, x)) <= 1e-7 * constraint_scale(problem, x)
        assert eval_loss(problem, x) == pytest.approx(L, rel=1e-7, abs=1e-9)
    # Any point of the constraint set along a random line through x0.
    d = rng.normal(size=n)
    qa = d @ problem.B @ d
    qb = 2 * (d @ problem.B @ x0 + problem.b @ d)
    if abs(qa) > 1e-8:
        s = -qb / qa
        x1 = x0 + s * d
        assert L <= eval_loss(problem, x1) + 1e-7 * max(1.0, eval_loss(problem, x1))


@pytest.mark.parametrize("n", [2, 3, 5])
def test_sphere_is_a_continuum(n):
    out = solve(sphere(n))
    assert out.solution_set.cardinality == np.inf
    assert out.infimum == pytest.approx(1.0)
