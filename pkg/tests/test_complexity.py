"""
Test cases for the dynamic sample complexity and the recovery condition.
"""
import math

import numpy as np
import pytest

from errors import EnumerationLimitError, InvalidArgumentError
from models import ComplexityBreakdown
from services.complexity import (
    breakdown_from_fractions,
    condition_rhs,
    dynamic_sample_complexity,
    estimate_expected_md,
    exact_expected_md,
    expected_md_lower_bound,
    minimum_upper_range,
    satisfies_condition,
)
from services.measurements import make_schedule, per_step_schedule


class TestDynamicSampleComplexity:
    """Tests for M_d and its weighted means."""

    @pytest.mark.parametrize("s", [1, 2, 3, 7, 49, 100])
    def test_constant_counts(self, s):
        """Test that M_j == M gives M_d == M exactly."""
        breakdown = dynamic_sample_complexity([137] * s, per_step_schedule(s))
        assert breakdown.md == 137.0
        assert breakdown.a_m == breakdown.g_m == 137.0

    def test_constant_counts_uneven_phases(self):
        """Test M_d == M / (s p_bar) when only the counts are constant."""
        breakdown = dynamic_sample_complexity([50, 50], make_schedule([0, 2, 10]))
        assert breakdown.md == pytest.approx(50 / 1.6)

    def test_two_level_example(self):
        """Test M = [4, 16, 4, 16] with equal fractions."""
        breakdown = breakdown_from_fractions([4, 16, 4, 16], [0.25] * 4)
        assert breakdown.a_m == pytest.approx(10.0)
        assert breakdown.g_m == pytest.approx(8.0)
        assert breakdown.md == pytest.approx(6.4)

    def test_schedule_and_fractions_agree(self):
        """Test the schedule and explicit-fraction entry points on the same input."""
        from_schedule = dynamic_sample_complexity([4, 16, 4, 16], per_step_schedule(4))
        from_fractions = breakdown_from_fractions([4, 16, 4, 16], [0.25] * 4)
        assert from_schedule.md == pytest.approx(from_fractions.md)

    def test_md_never_exceeds_arithmetic_mean(self, rng):
        """Test g_M <= a_M and M_d <= a_M / (s p_bar) on random inputs."""
        for _ in range(10_000):
            s = int(rng.integers(1, 9))
            m = rng.integers(1, 500, size=s).tolist()
            p = rng.dirichlet(np.ones(s))
            breakdown = breakdown_from_fractions(m, p / p.sum())
            assert breakdown.g_m <= breakdown.a_m
            assert breakdown.md <= breakdown.a_m / (breakdown.s * breakdown.p_bar) * (1 + 1e-12)

    @pytest.mark.parametrize("scale", [2, 3, 10])
    def test_scales_linearly(self, scale):
        """Test M_d(lambda M) == lambda M_d(M)."""
        schedule = make_schedule([0, 3, 4, 9])
        base = dynamic_sample_complexity([20, 45, 130], schedule)
        scaled = dynamic_sample_complexity([20 * scale, 45 * scale, 130 * scale], schedule)
        assert scaled.md == pytest.approx(scale * base.md, rel=1e-12)

    def test_count_mismatch(self):
        """Test that the count list must match the phase count."""
        with pytest.raises(InvalidArgumentError):
            dynamic_sample_complexity([10, 20], per_step_schedule(3))

    def test_zero_count_rejected(self):
        """Test M_j < 1."""
        with pytest.raises(InvalidArgumentError):
            dynamic_sample_complexity([10, 0], per_step_schedule(2))

    def test_fractions_must_sum_to_one(self):
        """Test an invalid fraction vector."""
        with pytest.raises(InvalidArgumentError):
            breakdown_from_fractions([10, 20], [0.5, 0.6])


class TestRecoveryCondition:
    """Tests for the sufficient recovery condition."""

    def test_rhs_formula(self):
        """Test the closed form at K=5, N=1000, eps=0.5, c~=96."""
        expected = math.log(30) + 3 * 5 * math.log(3 * 1000 * math.e / 5) + math.log(2)
        assert condition_rhs(5, 1000, 0.5, 96) == pytest.approx(expected)

    def test_rhs_hand_value(self):
        """Test ln 6 + 3 ln(3e) at K=1, N=1, eps=1, c~=96."""
        assert condition_rhs(1, 1, 1.0, 96) == pytest.approx(8.0876, abs=1e-3)

    def test_rhs_monotone(self):
        """Test that the right-hand side grows with K, N and 1/eps on 10-point grids."""
        by_k = [condition_rhs(k, 1000, 0.5, 96) for k in range(1, 11)]
        by_n = [condition_rhs(5, n, 0.5, 96) for n in np.geomspace(10, 10_000, 10).astype(int)]
        by_eps = [condition_rhs(5, 1000, eps, 96) for eps in np.geomspace(1.0, 1e-9, 10)]
        for values in (by_k, by_n, by_eps):
            assert all(later > earlier for earlier, later in zip(values, values[1:]))

    def test_rhs_scales_with_inverse_constant(self):
        """Test that halving c~ doubles the right-hand side."""
        assert condition_rhs(3, 200, 0.1, 48) == pytest.approx(2 * condition_rhs(3, 200, 0.1, 96))

    @pytest.mark.parametrize("k,n,eps,c", [(0, 10, 0.5, 1), (11, 10, 0.5, 1), (2, 10, 0.0, 1), (2, 10, 1.5, 1), (2, 10, 0.5, 0)])
    def test_rhs_domain(self, k, n, eps, c):
        """Test K outside [1, N], eps outside (0, 1] and c~ <= 0."""
        with pytest.raises(InvalidArgumentError):
            condition_rhs(k, n, eps, c)

    def test_satisfied_margin(self):
        """Test the margin sign of the check."""
        rhs = condition_rhs(5, 1000, 0.5, 96)
        above = satisfies_condition(breakdown_from_fractions([math.ceil(rhs) + 1], [1.0]), 5, 1000, 0.5, 96)
        below = satisfies_condition(breakdown_from_fractions([1], [1.0]), 5, 1000, 0.5, 96)
        assert above.satisfied and above.margin > 0
        assert not below.satisfied and below.margin < 0
        assert above.rhs == pytest.approx(rhs)

    def test_satisfied_at_equality(self):
        """Test that M_d equal to the right-hand side is satisfied with margin 0."""
        rhs = condition_rhs(5, 1000, 0.5, 96)
        breakdown = ComplexityBreakdown(
            measurements=(1,), fractions=(1.0,), s=1, p_bar=1.0, a_m=rhs, g_m=rhs, md=rhs
        )
        check = satisfies_condition(breakdown, 5, 1000, 0.5, 96)
        assert check.satisfied
        assert check.margin == 0.0

    def test_minimum_upper_range(self):
        """Test that the returned b is the least integer meeting the bound."""
        rhs = condition_rhs(5, 1000, 0.5, 96)
        for alpha in (1.0, 2.0, 7.5):
            b = minimum_upper_range(alpha, 5, 1000, 0.5, 96)
            assert 2 * alpha * b / (9 * (alpha + 1)) >= rhs
            assert 2 * alpha * (b - 1) / (9 * (alpha + 1)) < rhs

    def test_minimum_upper_range_alpha(self):
        """Test alpha < 1."""
        with pytest.raises(InvalidArgumentError):
            minimum_upper_range(0.5, 5, 1000, 0.5, 96)


class TestExpectedMd:
    """Tests for the expected M_d under uniform phase sizes."""

    @pytest.mark.parametrize("a,b,expected", [(2, 2, 2 / 9), (20, 150, 2 * 150**2 / (9 * 170)), (20, 40, 3200 / 540)])
    def test_lower_bound_formula(self, a, b, expected):
        """Test 2 b^2 / (9 (a + b))."""
        assert expected_md_lower_bound(a, b) == pytest.approx(expected)

    @pytest.mark.parametrize("a,b", [(1, 5), (6, 5)])
    def test_lower_bound_domain(self, a, b):
        """Test a < 2 and a > b."""
        with pytest.raises(InvalidArgumentError):
            expected_md_lower_bound(a, b)

    def test_exact_small_case(self):
        """Test the four equally likely outcomes of a=2, b=3, s=2."""
        # (2,2) -> 2, (3,3) -> 3, (2,3) and (3,2) -> 6 / 2.5
        assert exact_expected_md(2, 3, 2) == pytest.approx(2.45)

    def test_estimate_matches_enumeration(self):
        """Test the Monte Carlo mean against exhaustive enumeration."""
        exact = exact_expected_md(2, 3, 2)
        estimate = estimate_expected_md(2, 3, 2, trials=4000, seed=3)
        assert abs(estimate.mean - exact) <= 4 * estimate.std_error
        assert estimate.trials == 4000

    @pytest.mark.parametrize("a,b,s", [(2, 3, 2), (2, 5, 3), (4, 9, 2), (10, 12, 4)])
    def test_exact_exceeds_lower_bound(self, a, b, s):
        """Test that the exact expectation is above the closed-form bound."""
        assert exact_expected_md(a, b, s) > expected_md_lower_bound(a, b)

    @pytest.mark.parametrize("a,b", [(20, 150), (20, 60), (60, 200), (100, 100)])
    def test_estimate_exceeds_lower_bound(self, a, b):
        """Test the bound against sampled expectations at s = 10."""
        estimate = estimate_expected_md(a, b, 10, trials=500, seed=1)
        assert estimate.mean > expected_md_lower_bound(a, b)

    @pytest.mark.parametrize("a,b,s", [(2, 10, 5), (5, 20, 10), (20, 150, 100)])
    def test_estimate_clears_lower_bound_by_three_standard_errors(self, a, b, s):
        """Test the bound against 10^4 sampled schedules with a 3-standard-error margin."""
        estimate = estimate_expected_md(a, b, s, trials=10_000, seed=7)
        assert estimate.trials == 10_000
        assert estimate.mean - expected_md_lower_bound(a, b) >= 3 * estimate.std_error

    def test_estimate_is_deterministic(self):
        """Test that the same seed reproduces the estimate exactly."""
        first = estimate_expected_md(20, 150, 5, trials=200, seed=42)
        second = estimate_expected_md(20, 150, 5, trials=200, seed=42)
        assert first == second

    def test_estimate_independent_of_workers(self):
        """Test that a process pool returns the same estimate as inline runs."""
        inline = estimate_expected_md(20, 150, 5, trials=64, seed=8, workers=1)
        pooled = estimate_expected_md(20, 150, 5, trials=64, seed=8, workers=2)
        assert inline == pooled

    def test_enumeration_cap(self):
        """Test that oversized enumerations are refused."""
        with pytest.raises(EnumerationLimitError) as excinfo:
            exact_expected_md(2, 101, 4, cap=1000)
        assert excinfo.value.subsets == 100**4
