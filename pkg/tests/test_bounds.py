import itertools
import math
import pickle

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptrim import (
    UNBOUNDED,
    bound_report,
    chi2_bound,
    chi_bound,
    greedy_trim,
    total_residual,
)
from adaptrim.bounds import format_chi
from adaptrim.datagen import LinearScenario, gen_linear
from adaptrim.exceptions import InstanceTooLarge, InvalidResiduals

from conftest import scalar_problem


class TestChiBound:
    def test_arithmetic(self):
        assert chi_bound(10.0, 2.0) == pytest.approx(0.25)

    def test_zero_residual(self):
        assert chi_bound(5.0, 0.0) == 0.0
        assert chi_bound(0.0, 0.0) == 0.0

    def test_no_gain_is_unbounded(self):
        assert chi_bound(3.0, 3.0) is UNBOUNDED

    def test_roundoff_excess_is_unbounded(self):
        assert chi_bound(3.0, 3.0 + 1e-15) is UNBOUNDED

    @pytest.mark.parametrize("r_empty, r_O", [(1.0, 2.0), (-1.0, 0.0), (1.0, -0.5)])
    def test_invalid(self, r_empty, r_O):
        with pytest.raises(InvalidResiduals):
            chi_bound(r_empty, r_O)

    @given(st.floats(1e-6, 1e6), st.floats(0.0, 0.999), st.floats(1.001, 10.0))
    def test_monotone(self, r_O, frac, scale):
        # larger r(empty) with r(O) fixed shrinks chi; larger r(O) grows it
        r_empty = r_O / frac if frac > 0 else r_O * 2
        assert chi_bound(r_empty * scale, r_O) <= chi_bound(r_empty, r_O)
        if r_O * scale < r_empty:
            assert chi_bound(r_empty, r_O * scale) >= chi_bound(r_empty, r_O)


class TestUnbounded:
    def test_orders_above_reals(self):
        assert UNBOUNDED > 1e308
        assert UNBOUNDED > math.inf or float(UNBOUNDED) == math.inf
        assert not UNBOUNDED < 0
        assert 5.0 < UNBOUNDED

    def test_conversions(self):
        assert float(UNBOUNDED) == math.inf
        assert str(UNBOUNDED) == "inf"
        assert format_chi(UNBOUNDED) == "inf"
        assert format_chi(0.25) == "0.25"

    def test_singleton_survives_pickle(self):
        assert pickle.loads(pickle.dumps(UNBOUNDED)) is UNBOUNDED


class TestBoundReport:
    def test_empty_rejection(self, eight_with_two_outliers):
        problem, _ = eight_with_two_outliers
        rep = bound_report(problem, (), exact=True)
        assert rep.chi is UNBOUNDED
        assert rep.true_ratio == 0.0
        assert rep.r_star_k == pytest.approx(rep.r_empty)

    def test_empty_rejection_consistent(self):
        rep = bound_report(scalar_problem([1.0, 2.0]), ())
        assert rep.chi is UNBOUNDED
        rep = bound_report(scalar_problem([0.0, 0.0]), ())
        assert rep.chi == 0.0

    def test_planted_pair(self, eight_with_two_outliers):
        problem, planted = eight_with_two_outliers
        rep = bound_report(problem, planted, exact=True, bound=chi2_bound(0.05))
        assert rep.true_ratio == pytest.approx(0.0, abs=1e-12)
        assert rep.chi < 1e-3
        assert rep.cardinality == 2
        assert rep.r_star == pytest.approx(rep.r_O)
        assert rep.refined_ratio == pytest.approx(0.0, abs=1e-12)
        assert rep.holds()

    def test_inexact_leaves_optima_empty(self, eight_with_two_outliers):
        problem, planted = eight_with_two_outliers
        rep = bound_report(problem, planted)
        assert rep.r_star_k is None and rep.true_ratio is None
        assert rep.holds() is None
        assert rep.chi == chi_bound(rep.r_empty, rep.r_O)

    def test_too_large(self):
        problem = scalar_problem(np.arange(21.0))
        with pytest.raises(InstanceTooLarge):
            bound_report(problem, (0,), exact=True)


def _greedy_instance(seed, k):
    return gen_linear(LinearScenario(n=2, m=12, n_outliers=k, seed=seed))


@pytest.mark.parametrize("seed", range(10))
def test_greedy_certificate_holds(seed):
    problem, _ = _greedy_instance(seed, 3)
    outliers = greedy_trim(problem, 3)
    rep = bound_report(problem, outliers, exact=True)
    assert rep.r_star_k <= rep.r_O + 1e-12
    assert rep.holds()


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000), k=st.integers(0, 4), size=st.integers(0, 4))
def test_certificate_holds_for_any_rejection(seed, k, size):
    """Any subset, not only algorithm outputs, satisfies the inequality."""
    problem, _ = gen_linear(LinearScenario(n=1, m=9, n_outliers=k, seed=seed))
    rng = np.random.default_rng(seed)
    outliers = rng.choice(9, size=size, replace=False).tolist()
    rep = bound_report(problem, outliers, exact=True, max_measurements=9)
    assert 0.0 <= rep.true_ratio
    assert rep.holds()


def test_refined_bound_with_oracle():
    for seed in range(10):
        problem, truth = gen_linear(LinearScenario(n=1, m=10, n_outliers=2, seed=seed))
        bound = chi2_bound(truth.noise_sigma)
        outliers = greedy_trim(problem, 3)
        rep = bound_report(problem, outliers, exact=True, bound=bound)
        # |O| >= |O*| here, so the refined ratio exists and is certified
        assert rep.refined_ratio is not None
        assert rep.r_star >= rep.r_star_k - 1e-12
        assert rep.refined_ratio <= float(rep.chi) * (1 + 1e-9) + 1e-12


def test_rstar_reference_by_reverse_enumeration(eight_with_two_outliers):
    problem, _ = eight_with_two_outliers
    for k in range(4):
        combos = [c for size in range(k, -1, -1) for c in itertools.combinations(range(8), size)]
        expected = min(total_residual(problem, c) for c in reversed(combos))
        rep = bound_report(problem, tuple(range(k)), exact=True)
        assert rep.r_star_k == pytest.approx(expected, rel=1e-12)
