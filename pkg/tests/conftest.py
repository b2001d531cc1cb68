from pathlib import Path

import numpy as np
import pytest

from quadcon import ProblemSpec

PROBLEMS_DIR = Path(__file__).resolve().parent.parent / "problems"

_criteria: dict[int, tuple[bool, str]] = {}


def worked_example(kappa: float) -> ProblemSpec:
    """Unit ball constraint, target (1,1,1), objective matrix singular exactly at kappa = 0."""
    A = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, -1.0], [0.0, -1.0, 1.0 + kappa]])
    return ProblemSpec(A, np.eye(3), np.ones(3), np.zeros(3), 1.0)


def sphere(n: int) -> ProblemSpec:
    return ProblemSpec(np.eye(n), np.eye(n), np.zeros(n), np.zeros(n), 1.0)


def half_loss(B, k) -> ProblemSpec:
    """Loss x1^2 on (x1, x0) with constraint x'Bx = k."""
    return ProblemSpec(np.diag([1.0, 0.0]), B, np.zeros(2), np.zeros(2), k)


@pytest.fixture
def record_criterion():
    def record(number: int, passed: bool, detail: str) -> None:
        _criteria[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        passed, detail = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
