import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from phaseforge.model import (
    DisplacementDesign,
    ProbeSpec,
    bucket_pmf,
    fold_halfturn,
    outcome_pmf,
    poisson_mean,
    reduce_angle,
    sample_outcome,
    sample_outcomes,
    wrap_signed,
)


def poisson_pmf_oracle(lam, m):
    """Direct factorial summation, independent of the production path."""
    probs = [math.exp(-lam) * lam ** k / math.factorial(k) for k in range(m)]
    return np.array(probs + [1.0 - sum(probs)])


class TestAngles:
    def test_reduce_angle_range(self):
        for x in (-10.0, -1e-18, 0.0, 1.0, 2 * math.pi, 7.0, 1e6):
            r = reduce_angle(x)
            assert 0.0 <= r < 2 * math.pi

    def test_wrap_signed(self):
        assert wrap_signed(3 * math.pi) == pytest.approx(math.pi)
        assert wrap_signed(-0.1) == pytest.approx(-0.1)
        assert wrap_signed(2 * math.pi - 0.1) == pytest.approx(-0.1)

    def test_fold_halfturn(self):
        assert fold_halfturn(-1.5) == pytest.approx(1.5)
        assert fold_halfturn(2 * math.pi - 0.3) == pytest.approx(0.3)
        arr = fold_halfturn(np.array([0.0, math.pi, -math.pi / 2]))
        assert arr == pytest.approx([0.0, math.pi, math.pi / 2])


class TestTypes:
    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ProbeSpec(alpha=-1.0, steps_L=1, pnr_m=1)
        with pytest.raises(ValueError):
            ProbeSpec(alpha=1.0, steps_L=0, pnr_m=1)
        with pytest.raises(ValueError):
            ProbeSpec(alpha=1.0, steps_L=1, pnr_m=0)

    def test_spec_derived(self):
        spec = ProbeSpec(alpha=2.0, steps_L=4, pnr_m=3)
        assert spec.step_amplitude == pytest.approx(1.0)
        assert spec.n_outcomes == 4

    def test_design_reduces_theta(self):
        d = DisplacementDesign(theta=-0.5, magnitude=1.0)
        assert 0.0 <= d.theta < 2 * math.pi
        assert d.theta == pytest.approx(2 * math.pi - 0.5)
        with pytest.raises(ValueError):
            DisplacementDesign(theta=0.0, magnitude=-1.0)


class TestPoissonMean:
    def test_exact_nulling(self):
        spec = ProbeSpec(alpha=1.0, steps_L=1, pnr_m=3)
        d = DisplacementDesign(theta=0.7, magnitude=1.0)
        assert poisson_mean(spec, d, 0.7) == 0.0

    def test_anti_aligned(self):
        spec = ProbeSpec(alpha=1.0, steps_L=1, pnr_m=1)
        d = DisplacementDesign(theta=0.3 + math.pi, magnitude=1.0)
        assert poisson_mean(spec, d, 0.3) == pytest.approx(4.0)

    def test_no_displacement(self):
        spec = ProbeSpec(alpha=2.0, steps_L=4, pnr_m=1)
        d = DisplacementDesign(theta=0.0, magnitude=0.0)
        assert poisson_mean(spec, d, 1.234) == pytest.approx(1.0)

    @given(st.floats(0.0, 8.0), st.integers(1, 200), st.floats(0.0, 20.0),
           st.floats(0.0, 7.0), st.floats(0.0, 7.0))
    @settings(max_examples=100, deadline=None)
    def test_periodic_and_symmetric(self, alpha, steps, mag, theta, phi):
        spec = ProbeSpec(alpha=alpha, steps_L=steps, pnr_m=1)
        d = DisplacementDesign(theta=theta, magnitude=mag)
        lam = poisson_mean(spec, d, phi)
        assert lam >= 0.0
        assert poisson_mean(spec, d, phi + 2 * math.pi) == pytest.approx(lam, abs=1e-9)
        # symmetry under (phi - theta) -> -(phi - theta)
        mirrored = poisson_mean(spec, d, 2 * theta - phi)
        assert mirrored == pytest.approx(lam, abs=1e-9)


class TestOutcomePmf:
    def test_nulling_point_mass(self):
        spec = ProbeSpec(alpha=1.0, steps_L=1, pnr_m=3)
        d = DisplacementDesign(theta=0.0, magnitude=1.0)
        assert outcome_pmf(spec, d, 0.0) == pytest.approx([1.0, 0.0, 0.0, 0.0])

    def test_two_bucket_identity(self):
        spec = ProbeSpec(alpha=1.3, steps_L=2, pnr_m=1)
        d = DisplacementDesign(theta=0.4, magnitude=0.8)
        lam = poisson_mean(spec, d, 2.0)
        pmf = outcome_pmf(spec, d, 2.0)
        assert pmf == pytest.approx([math.exp(-lam), 1.0 - math.exp(-lam)])

    def test_lam2_m3_frozen(self):
        # oracle: direct Poisson summation at lam = 2
        spec = ProbeSpec(alpha=2.0, steps_L=2, pnr_m=3)
        d = DisplacementDesign(theta=0.0, magnitude=0.0)
        assert poisson_mean(spec, d, 0.0) == pytest.approx(2.0)
        pmf = outcome_pmf(spec, d, 0.0)
        assert pmf == pytest.approx([0.135335, 0.270671, 0.270671, 0.323324], abs=1e-6)
        assert pmf == pytest.approx(poisson_pmf_oracle(2.0, 3), abs=1e-12)

    @given(st.floats(0.0, 8.0), st.integers(1, 300), st.integers(1, 10),
           st.floats(0.0, 25.0), st.floats(0.0, 7.0), st.floats(0.0, 7.0))
    @settings(max_examples=200, deadline=None)
    def test_normalized_nonnegative(self, alpha, steps, m, mag, theta, phi):
        spec = ProbeSpec(alpha=alpha, steps_L=steps, pnr_m=m)
        d = DisplacementDesign(theta=theta, magnitude=mag)
        pmf = outcome_pmf(spec, d, phi)
        assert pmf.shape == (m + 1,)
        assert np.all(pmf >= 0.0)
        assert np.all(pmf <= 1.0)
        assert abs(pmf.sum() - 1.0) <= 1e-12

    def test_large_resolution_matches_untruncated_poisson(self):
        # pnr_m = 200 behaves as an infinite-resolution surrogate for lam <= 20
        for lam in (0.3, 2.0, 7.5, 20.0):
            pmf = bucket_pmf(np.array(lam), 200)
            ks = np.arange(200)
            exact = stats.poisson.pmf(ks, lam)
            assert np.max(np.abs(pmf[:200] - exact)) <= 1e-12
            assert abs(pmf[200] - stats.poisson.sf(199, lam)) <= 1e-12

    def test_large_lam_no_overflow(self):
        pmf = bucket_pmf(np.array(120.0), 60)
        assert np.all(np.isfinite(pmf))
        assert abs(pmf.sum() - 1.0) <= 1e-12


class TestSampling:
    def test_nulling_always_zero(self):
        spec = ProbeSpec(alpha=1.0, steps_L=1, pnr_m=2)
        d = DisplacementDesign(theta=1.1, magnitude=1.0)
        rng = np.random.default_rng(0)
        assert all(sample_outcome(spec, d, 1.1, rng) == 0 for _ in range(50))

    def test_determinism(self):
        spec = ProbeSpec(alpha=1.4, steps_L=3, pnr_m=4)
        d = DisplacementDesign(theta=0.3, magnitude=0.9)
        a = [sample_outcome(spec, d, 2.0, np.random.default_rng(123)) for _ in range(1)]
        b = [sample_outcome(spec, d, 2.0, np.random.default_rng(123)) for _ in range(1)]
        assert a == b

    def test_vector_scalar_stream_compatible(self):
        spec = ProbeSpec(alpha=1.4, steps_L=3, pnr_m=4)
        d = DisplacementDesign(theta=0.3, magnitude=0.9)
        vec = sample_outcomes(spec, d, 2.0, np.random.default_rng(7), 64)
        rng = np.random.default_rng(7)
        seq = [sample_outcome(spec, d, 2.0, rng) for _ in range(64)]
        assert np.array_equal(vec, seq)

    def test_frequencies_match_pmf(self):
        # 1e6 draws at lam=2, m=3: per-bucket counts within 4 sigma (multinomial)
        spec = ProbeSpec(alpha=2.0, steps_L=2, pnr_m=3)
        d = DisplacementDesign(theta=0.0, magnitude=0.0)
        n = 1_000_000
        draws = sample_outcomes(spec, d, 0.0, np.random.default_rng(99), n)
        pmf = outcome_pmf(spec, d, 0.0)
        counts = np.bincount(draws, minlength=4)
        for k in range(4):
            sigma = math.sqrt(n * pmf[k] * (1.0 - pmf[k]))
            assert abs(counts[k] - n * pmf[k]) <= 4.0 * sigma
