import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from polywalk.steps import (
    Chi,
    HalfNormal,
    make_chi,
    make_half_normal_matched,
    matched_half_normal_scale,
    sample_truncated,
    truncated_log_pdf,
)

# frozen from mpmath: sqrt(2) * erfinv(1/2) and sqrt(2 ln 2)
HALF_NORMAL_MEDIAN = 0.674489750196081743202
CHI2_MEDIAN = 1.17741002251547469101


class TestChi:
    def test_chi1_is_half_normal(self):
        p = make_chi(1)
        s = np.linspace(0, 5, 41)
        assert np.allclose(p.cdf(s), 2 * stats.norm.cdf(s) - 1, atol=1e-14)

    def test_second_moment(self):
        p = make_chi(3)
        m2, _ = integrate.quad(lambda s: s * s * p.pdf(s), 0, np.inf, epsabs=1e-12)
        assert m2 == pytest.approx(3.0, abs=1e-8)

    @pytest.mark.parametrize("d", [1, 2, 8, 32])
    def test_round_trip(self, d):
        p = make_chi(d)
        assert p.inverse_cdf(p.cdf(1.7)) == pytest.approx(1.7, abs=1e-10)

    def test_median(self):
        assert make_chi(2).inverse_cdf(0.5) == pytest.approx(CHI2_MEDIAN, abs=1e-12)

    def test_matches_scipy(self):
        s = np.linspace(0.01, 8, 50)
        for d in (1, 3, 10):
            assert np.allclose(make_chi(d).log_pdf(s), stats.chi(d).logpdf(s), atol=1e-12)

    def test_edges(self):
        p = make_chi(4)
        assert p.inverse_cdf(0.0) == 0.0
        assert p.inverse_cdf(1.0) == math.inf
        assert p.log_pdf(-1.0) == -math.inf
        with pytest.raises(ValueError):
            Chi(0)

    @given(st.floats(1e-9, 1 - 1e-9), st.integers(1, 40))
    def test_inverse_property(self, u, d):
        p = make_chi(d)
        assert p.cdf(p.inverse_cdf(u)) == pytest.approx(u, abs=1e-10)


class TestHalfNormal:
    def test_matched_scale(self):
        assert matched_half_normal_scale(4) == 2.0
        m1 = math.sqrt(math.pi) * math.gamma(2.5) / math.gamma(2.0)
        assert matched_half_normal_scale(4, "first") == pytest.approx(m1, rel=1e-14)
        # first-moment match: same mean as chi_4
        assert m1 * math.sqrt(2 / math.pi) == pytest.approx(stats.chi(4).mean(), rel=1e-12)
        with pytest.raises(ValueError):
            matched_half_normal_scale(0)
        with pytest.raises(ValueError):
            matched_half_normal_scale(2, "third")

    def test_d1_equals_chi1(self):
        h, c = make_half_normal_matched(1), make_chi(1)
        s = np.linspace(0, 6, 61)
        assert np.max(np.abs(h.pdf(s) - c.pdf(s))) <= 1e-12
        assert np.max(np.abs(h.cdf(s) - c.cdf(s))) <= 1e-12

    def test_second_moment_d4(self):
        p = make_half_normal_matched(4)
        m2, _ = integrate.quad(lambda s: s * s * p.pdf(s), 0, np.inf, epsabs=1e-12)
        assert m2 == pytest.approx(4.0, abs=1e-6)

    def test_cdf_inf_and_median(self):
        p = HalfNormal(1.0)
        assert p.cdf(math.inf) == 1.0
        assert p.log_cdf(math.inf) == 0.0
        assert p.inverse_cdf(0.5) == pytest.approx(HALF_NORMAL_MEDIAN, abs=1e-14)

    def test_scalar_and_array_agree(self):
        p = HalfNormal(1.3)
        s = np.array([0.0, 0.2, 1.0, 3.0])
        assert np.array_equal(p.log_pdf(s), [p.log_pdf(float(v)) for v in s])
        assert np.allclose(p.cdf(s), [p.cdf(float(v)) for v in s], rtol=1e-15, atol=0)
        u = np.array([1e-8, 0.3, 0.5, 0.9, 1 - 1e-12])
        assert np.array_equal(p.inverse_cdf(u), [p.inverse_cdf(float(v)) for v in u])

    def test_log_cdf_tail(self):
        p = HalfNormal(1.0)
        assert p.log_cdf(10.0) == pytest.approx(-stats.norm.sf(10.0) * 2, rel=1e-6)
        assert p.log_cdf(1e-3) == pytest.approx(math.log(math.erf(1e-3 / math.sqrt(2))), rel=1e-12)

    @given(st.floats(1e-12, 1 - 1e-12), st.floats(0.1, 10.0))
    def test_inverse_property(self, u, scale):
        p = HalfNormal(scale)
        assert p.cdf(p.inverse_cdf(u)) == pytest.approx(u, abs=1e-10)

    def test_bad_scale(self):
        with pytest.raises(ValueError):
            HalfNormal(0.0)


class TestTruncation:
    def test_infinite_smax(self):
        p = make_chi(3)
        assert truncated_log_pdf(p, 0.8, math.inf) == pytest.approx(p.log_pdf(0.8), abs=1e-15)

    def test_outside(self):
        p = make_chi(3)
        assert truncated_log_pdf(p, 1.5, 1.0) == -math.inf
        assert truncated_log_pdf(p, -0.1, 1.0) == -math.inf
        with pytest.raises(ValueError):
            truncated_log_pdf(p, 0.5, 0.0)

    def test_chi2_normalisation(self):
        p = make_chi(2)
        total, _ = integrate.quad(lambda s: math.exp(truncated_log_pdf(p, s, 1.0)), 0, 1,
                                  epsabs=1e-13, epsrel=1e-13)
        assert total == pytest.approx(1.0, abs=1e-8)

    @given(st.floats(0.05, 6.0), st.sampled_from(["chi", "hn"]), st.integers(1, 10))
    def test_normalisation_random_smax(self, smax, which, d):
        p = make_chi(d) if which == "chi" else make_half_normal_matched(d)
        total, _ = integrate.quad(lambda s: math.exp(truncated_log_pdf(p, s, smax)), 0, smax,
                                  epsabs=1e-12)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_sample_median_and_small_u(self):
        p = HalfNormal(1.0)
        assert sample_truncated(p, math.inf, 0.5) == pytest.approx(HALF_NORMAL_MEDIAN, abs=1e-14)
        assert 0.0 < sample_truncated(p, 2.0, 1e-15) < 1e-12
        with pytest.raises(ValueError):
            sample_truncated(p, 1.0, 0.0)
        with pytest.raises(ValueError):
            sample_truncated(p, 1.0, 1.0)
        with pytest.raises(ValueError):
            sample_truncated(p, 0.0, 0.5)

    def test_never_exceeds_smax(self):
        p = HalfNormal(1.0)
        assert sample_truncated(p, 1e-3, 1 - 1e-16) <= 1e-3

    @pytest.mark.parametrize("p", [make_chi(4), make_half_normal_matched(4)], ids=["chi4", "hn4"])
    def test_ks_truncated(self, p, rng):
        smax = 2.0
        u = rng.random(100_000)
        draws = np.array([sample_truncated(p, smax, float(v)) for v in u])
        Fmax = p.cdf(smax)
        ks = stats.kstest(draws, lambda s: np.minimum(p.cdf(s) / Fmax, 1.0))
        assert ks.statistic <= 0.01
        assert ks.pvalue > 0.001
