"""
Test cases for schedules, ensembles and signal sampling.
"""
import numpy as np
import pytest

from errors import InvalidArgumentError
from models import EnsembleSpec
from services.measurements import (
    derive_seed,
    draw_phase_sizes,
    make_phase,
    make_schedule,
    per_step_schedule,
    phase_stream,
    sample_matrix,
    sample_signal,
)


class TestSchedules:
    """Tests for phase schedule construction."""

    def test_single_phase(self):
        """Test the one-phase schedule."""
        schedule = make_schedule([0, 10])
        assert schedule.phase_count == 1
        assert schedule.durations == (10,)
        assert schedule.fractions == (1.0,)
        assert schedule.horizon == 10

    def test_unit_phases(self):
        """Test three unit-length phases."""
        schedule = make_schedule([0, 1, 2, 3])
        assert schedule.phase_count == 3
        assert schedule.fractions == pytest.approx([1 / 3] * 3)

    def test_uneven_phases(self):
        """Test durations, fractions and p_bar for [0, 2, 10]."""
        schedule = make_schedule([0, 2, 10])
        assert schedule.durations == (2, 8)
        assert schedule.fractions == pytest.approx([0.2, 0.8])
        assert schedule.p_bar == pytest.approx(0.8)

    @pytest.mark.parametrize("boundaries", [[], [0], [1, 4], [0, 3, 3], [0, 5, 2]])
    def test_invalid_boundaries(self, boundaries):
        """Test that empty, non-zero-based or non-monotone boundaries are rejected."""
        with pytest.raises(InvalidArgumentError):
            make_schedule(boundaries)

    def test_per_step_single(self):
        """Test per_step_schedule(1)."""
        schedule = per_step_schedule(1)
        assert schedule.durations == (1,)

    def test_per_step_quarters(self):
        """Test per_step_schedule(4)."""
        assert per_step_schedule(4).fractions == (0.25,) * 4

    @pytest.mark.parametrize("horizon", [2, 5, 100])
    def test_per_step_p_bar(self, horizon):
        """Test p_bar == 1/T when s = T."""
        assert per_step_schedule(horizon).p_bar == pytest.approx(1 / horizon)

    def test_per_step_rejects_zero(self):
        """Test T < 1."""
        with pytest.raises(InvalidArgumentError):
            per_step_schedule(0)

    def test_fractions_consistent(self, rng):
        """Test sum(p) == 1 and max(p) == p_bar on random schedules."""
        for _ in range(100):
            cuts = np.sort(rng.choice(np.arange(1, 500), size=int(rng.integers(1, 30)), replace=False))
            schedule = make_schedule([0, *cuts.tolist(), 500])
            assert abs(sum(schedule.fractions) - 1) <= 1e-12
            assert max(schedule.fractions) == schedule.p_bar
            assert sum(schedule.durations) == schedule.horizon


class TestPhaseSizes:
    """Tests for uniform measurement-count draws."""

    def test_degenerate_range(self):
        """Test a == b."""
        assert draw_phase_sizes(7, 7, 5, 123) == [7] * 5

    def test_uniform_mean(self):
        """Test the empirical mean of uniform {1, 2, 3}."""
        sizes = draw_phase_sizes(1, 3, 100_000, 99)
        assert set(sizes) == {1, 2, 3}
        assert np.mean(sizes) == pytest.approx(2.0, abs=0.01)

    def test_deterministic(self):
        """Test that the same seed gives the same list."""
        assert draw_phase_sizes(20, 150, 50, 5) == draw_phase_sizes(20, 150, 50, 5)
        seed = derive_seed(5, "trial", 3)
        assert draw_phase_sizes(20, 150, 50, seed) == draw_phase_sizes(20, 150, 50, derive_seed(5, "trial", 3))

    @pytest.mark.parametrize("a,b", [(5, 4), (0, 3)])
    def test_invalid_range(self, a, b):
        """Test a > b and a < 1."""
        with pytest.raises(InvalidArgumentError):
            draw_phase_sizes(a, b, 3, 0)


class TestSampleMatrix:
    """Tests for scaled sub-Gaussian ensembles."""

    def test_rademacher_two_point(self):
        """Test that sqrt(M) * Phi has only +-1 entries."""
        m = 17
        phi = sample_matrix(EnsembleSpec(family="rademacher"), m, 23, 4)
        np.testing.assert_allclose(np.abs(np.sqrt(m) * phi), 1.0)

    def test_gaussian_entry_variance(self):
        """Test the 1/M entry variance at M = N = 100."""
        phi = sample_matrix(EnsembleSpec(family="gaussian"), 100, 100, 8)
        assert 0.008 <= np.var(phi) <= 0.012

    def test_gaussian_column_norms(self):
        """Test E||Phi e_i||^2 = 1."""
        phi = sample_matrix(EnsembleSpec(family="gaussian"), 256, 64, 3)
        assert np.mean(np.sum(phi * phi, axis=0)) == pytest.approx(1.0, abs=0.1)

    @pytest.mark.parametrize("family", ["gaussian", "rademacher", "uniform-symmetric"])
    def test_unit_variance_before_scaling(self, family):
        """Test empirical variance of sqrt(M) * Phi within 5% of 1."""
        m, n = 200, 100
        phi = sample_matrix(EnsembleSpec(family=family), m, n, 21)
        assert np.var(np.sqrt(m) * phi) == pytest.approx(1.0, rel=0.05)

    def test_seed_determinism(self):
        """Test that the same seed reproduces the matrix bit for bit."""
        spec = EnsembleSpec(family="gaussian")
        np.testing.assert_array_equal(
            sample_matrix(spec, 30, 40, derive_seed(1, 2, 3)),
            sample_matrix(spec, 30, 40, derive_seed(1, 2, 3)),
        )
        assert not np.array_equal(
            sample_matrix(spec, 30, 40, derive_seed(1, 2, 3)),
            sample_matrix(spec, 30, 40, derive_seed(1, 2, 4)),
        )

    def test_identity_is_square(self):
        """Test the identity test ensemble."""
        np.testing.assert_array_equal(sample_matrix(EnsembleSpec(family="identity"), 4, 4, 0), np.eye(4))
        with pytest.raises(InvalidArgumentError):
            sample_matrix(EnsembleSpec(family="identity"), 3, 4, 0)

    def test_rejects_empty_sizes(self):
        """Test M or N below 1."""
        with pytest.raises(InvalidArgumentError):
            sample_matrix(EnsembleSpec(), 0, 4, 0)


class TestSampleSignal:
    """Tests for ground-truth signal sampling."""

    def test_dense_support(self):
        """Test K == N."""
        signal = sample_signal(12, 12, 0)
        assert np.count_nonzero(signal.values) == 12

    def test_exact_cardinality(self, rng):
        """Test that the support has exactly K entries."""
        for _ in range(100):
            n = int(rng.integers(1, 200))
            k = int(rng.integers(1, n + 1))
            seed = int(rng.integers(0, 2**31))
            assert np.count_nonzero(sample_signal(n, k, seed).values) == k

    def test_uniform_support_law(self):
        """Test that each index is the support with frequency 1/N."""
        draws = 20_000
        counts = np.zeros(10)
        for r in range(draws):
            counts += sample_signal(10, 1, derive_seed(77, r)).values != 0
        np.testing.assert_allclose(counts / draws, 0.1, atol=0.01)

    def test_invalid_sparsity(self):
        """Test K outside [1, N]."""
        with pytest.raises(InvalidArgumentError):
            sample_signal(5, 6, 0)
        with pytest.raises(InvalidArgumentError):
            sample_signal(5, 0, 0)


class TestPhaseStream:
    """Tests for the lazy phase generator."""

    def test_noiseless_measurements(self):
        """Test y_j == Phi_j x for every generated phase."""
        truth = sample_signal(30, 3, 1)
        phases = list(phase_stream(EnsembleSpec(), [10, 12, 9], truth, [1, 2, 3]))
        assert [p.rows for p in phases] == [10, 12, 9]
        for phase in phases:
            np.testing.assert_array_equal(phase.measurement, phase.matrix @ truth.values)

    def test_is_lazy(self):
        """Test that nothing is sampled before the first pull."""
        truth = sample_signal(10, 2, 0)
        stream = phase_stream(EnsembleSpec(), iter([5]), truth, iter([0]))
        assert next(stream).rows == 5
        with pytest.raises(StopIteration):
            next(stream)

    def test_make_phase(self, small_truth):
        """Test that a phase records the matrix row count."""
        phase = make_phase(np.ones((3, 8)), small_truth)
        assert phase.rows == 3
        np.testing.assert_allclose(phase.measurement, [-0.5] * 3)
