import numpy as np
import pytest

from quadcon import ProblemSpec
from quadcon.errors import NoFeasiblePoints
from quadcon.oracle import brute_force_min, grid_has_feasible_point

from conftest import half_loss, sphere, worked_example


def test_sphere_minimum_on_unit_circle():
    result = brute_force_min(sphere(2), grid_range=2.0, resolution=201)
    assert result.approx_infimum == pytest.approx(1.0, abs=1e-4)
    assert all(abs(np.linalg.norm(p) - 1.0) < 1e-6 for p in result.best_points)


def test_worked_example_value():
    result = brute_force_min(worked_example(1.5), grid_range=2.0, resolution=81)
    assert result.approx_infimum == pytest.approx(0.370, abs=1e-3)


def test_two_separated_minima():
    result = brute_force_min(half_loss(np.diag([1.0, -1.0]), 1.0), grid_range=4.0)
    assert result.approx_infimum == pytest.approx(1.0, abs=1e-3)
    assert sorted(round(float(p[0])) for p in result.best_points) == [-1, 1]


def test_unattained_zero_infimum_shrinks_with_box():
    product = half_loss(np.array([[0.0, 0.5], [0.5, 0.0]]), 1.0)
    values = [brute_force_min(product, grid_range=w / 2, resolution=201).approx_infimum for w in (10, 100, 1000)]
    assert values[0] > values[1] > values[2] > 0.0


def test_inequality_sense():
    disc = ProblemSpec(np.eye(2), np.eye(2), [2.0, 0.0], np.zeros(2), 1.0, "le")
    assert brute_force_min(disc, grid_range=3.0).approx_infimum == pytest.approx(1.0, abs=1e-4)


def test_empty_constraint_raises():
    with pytest.raises(NoFeasiblePoints):
        brute_force_min(ProblemSpec(np.eye(2), np.eye(2), np.zeros(2), np.zeros(2), -1.0), grid_range=3.0)


def test_dimension_limit():
    with pytest.raises(ValueError):
        brute_force_min(sphere(4))


@pytest.mark.parametrize("k, expected", [(1.0, True), (-1.0, False), (400.0, False)])
def test_grid_feasibility_scan(k, expected):
    problem = ProblemSpec(np.eye(2), np.eye(2), np.zeros(2), np.zeros(2), k)
    assert grid_has_feasible_point(problem, grid_range=10.0, resolution=101) == expected
