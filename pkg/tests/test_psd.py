import numpy as np
import pytest

from quadcon import ProblemSpec, solve
from quadcon.problem import eval_constraint, eval_loss
from quadcon.psd import FiberDescription, FiberKind, PsdCase, approach_path, classify_psd, sublevel_fiber
from quadcon.transforms import simplified_data, to_centred_ls, to_simplified_form, to_simultaneous_diagonal

from conftest import half_loss


def _data(problem):
    centred, _, _ = to_centred_ls(problem)
    r = int(np.sum(np.diag(centred.A)))
    simplified, _, data = to_simplified_form(centred, r)
    _, _, data = to_simultaneous_diagonal(simplified, data)
    return data


@pytest.mark.parametrize(
    "B, k, case",
    [
        (np.diag([1.0, -1.0]), -1.0, PsdCase.PERFECT),
        (np.array([[0.0, 0.5], [0.5, 0.0]]), 1.0, PsdCase.ESSENTIALLY_PERFECT),
        (np.diag([1.0, -1.0]), 1.0, PsdCase.PROJECTED_IMPERFECT),
        (np.diag([1.0, 1.0]), 1.0, PsdCase.PERFECT),
        (np.diag([0.0, 1.0]), -1.0, PsdCase.PROJECTED_IMPERFECT),
    ],
)
def test_classification(B, k, case):
    assert classify_psd(_data(half_loss(B, k))).case is case


def test_perfect_fibre_samples_are_zero_loss_and_feasible():
    problem = ProblemSpec(np.diag([1.0, 0.0, 0.0]), np.diag([1.0, 1.0, -2.0]), [0.5, 0.0, 0.0],
                          [0.0, 1.0, 0.0], 3.0)
    out = solve(problem)
    assert out.infimum == 0.0
    for x in out.sample(30, seed=5):
        assert eval_loss(problem, x) == pytest.approx(0.0, abs=1e-12)
        assert eval_constraint(problem, x) == pytest.approx(0.0, abs=1e-8)


def test_union_over_linear_fibre():
    fiber = FiberDescription(FiberKind.UNION_OVER_LINEAR, 2, np.array([2.0]), np.array([0.5]), 1.0,
                             np.array([1.0, -1.0]))
    rng = np.random.default_rng(0)
    assert fiber.contains(fiber.representative())
    for _ in range(20):
        assert fiber.contains(fiber.sample(rng), tol=1e-10)


def test_sublevel_fibre_samples_satisfy_inequality():
    fiber = FiberDescription(FiberKind.SUBLEVEL, 0, np.array([1.0, 3.0]), np.zeros(2), 2.0)
    rng = np.random.default_rng(1)
    assert fiber.contains(fiber.representative())
    assert all(fiber.contains(fiber.sample(rng)) for _ in range(50))


def test_sublevel_fibre_empty_when_level_unreachable():
    data = _data(ProblemSpec(np.diag([1.0, 0.0]), np.eye(2), [0.0, 0.0], [0.0, 0.0], -1.0))
    assert sublevel_fiber(data) is None


def test_approach_path_is_feasible_with_quadratic_loss():
    problem = half_loss(np.array([[0.0, 0.5], [0.5, 0.0]]), 1.0)
    data = simplified_data(problem, 1, 0)
    path = approach_path(data)
    for tau in (1e-1, 1e-2, 1e-3):
        x = path.point(tau)
        assert eval_loss(problem, x) == pytest.approx(tau ** 2, rel=1e-12)
        assert eval_constraint(problem, x) == pytest.approx(0.0, abs=1e-9)


def test_essentially_perfect_solve_reports_approach_points():
    problem = half_loss(np.array([[0.0, 0.5], [0.5, 0.0]]), 1.0)
    out = solve(problem)
    assert not out.attained and out.representative is None
    for x in out.approach_points(1e-4, 10, seed=2):
        assert eval_loss(problem, x) <= 1e-4
        assert eval_constraint(problem, x) == pytest.approx(0.0, abs=1e-6 * max(1.0, np.abs(x).max() ** 2))
