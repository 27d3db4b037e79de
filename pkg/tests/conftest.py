import numpy as np
import pytest

from adaptrim.solvers import LinearProblem


def scalar_problem(values, a=None):
    values = np.asarray(values, dtype=float)
    a = np.ones_like(values) if a is None else np.asarray(a, dtype=float)
    return LinearProblem(a[:, None], values)


@pytest.fixture
def eight_with_two_outliers():
    """Six inliers near y = 2 a and two gross outliers at indices 2 and 5."""
    rng = np.random.default_rng(7)
    a = rng.uniform(0.5, 2.0, size=8)
    y = 2.0 * a + 0.05 * rng.standard_normal(8)
    y[2] += 30.0
    y[5] -= 25.0
    return LinearProblem(a[:, None], y), (2, 5)


@pytest.fixture
def ten_scalar_two_outliers():
    rng = np.random.default_rng(0)
    y = 1.0 + 0.01 * rng.standard_normal(10)
    y[3], y[7] = 10.0, -10.0
    return scalar_problem(y), {3, 7}
