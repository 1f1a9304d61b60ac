import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from hashpop.errors import DomainError, UnsupportedVariantError
from hashpop.model import (
    Constant,
    Degenerate,
    Discrete,
    GammaKernel,
    NetworkParams,
    Tabulated,
    degree_moments,
    evaluate_popularity,
)
from hashpop.moments import (
    asymptotic_moments,
    confidence_band,
    cumulative_intensity,
    mean_reads,
    mgf_value,
    normal_quantile,
    variance_reads,
)

NET = NetworkParams(1000, 5.0, 50.0)


def quadrature_intensity(params, spec, t):
    value, _ = quad(lambda s: evaluate_popularity(spec, s), 0.0, t,
                    epsabs=0.0, epsrel=1e-13, limit=500)
    return params.n_users * value


class TestCumulativeIntensity:

    def test_constant(self):
        assert cumulative_intensity(NetworkParams(1000, 1, 1), Constant(0.01), 10.0) == pytest.approx(100.0)

    @pytest.mark.parametrize("spec", [Constant(0.3), GammaKernel(2, 1, 0.2), Tabulated((0, 1), (0.1, 0.2))])
    def test_zero_time(self, spec):
        assert cumulative_intensity(NET, spec, 0.0) == 0.0

    def test_gamma_against_quadrature(self):
        params = NetworkParams(500, 1.0, 1.0)
        spec = GammaKernel(2.0, 1.5, 0.3)
        assert cumulative_intensity(params, spec, 4.0) == pytest.approx(
            quadrature_intensity(params, spec, 4.0), rel=1e-9)

    def test_tabulated_trapezoid(self):
        spec = Tabulated((0.0, 1.0, 3.0), (0.0, 0.4, 0.0))
        params = NetworkParams(10, 1.0, 1.0)
        assert cumulative_intensity(params, spec, 3.0) == pytest.approx(10 * 0.6)
        # partial last segment: 0.2 + area from 1 to 2 = 0.2 + 0.3
        assert cumulative_intensity(params, spec, 2.0) == pytest.approx(10 * 0.5)

    def test_tabulated_needs_origin(self):
        with pytest.raises(DomainError):
            cumulative_intensity(NET, Tabulated((1.0, 2.0), (0.1, 0.1)), 1.5)

    def test_negative_time(self):
        with pytest.raises(DomainError):
            cumulative_intensity(NET, Constant(0.1), -0.5)

    def test_large_shape_does_not_overflow(self):
        # e^a alone overflows near a = 709
        spec = GammaKernel(900.0, 0.01, 0.5)
        value = cumulative_intensity(NetworkParams(1, 1, 1), spec, 20.0)
        assert math.isfinite(value) and value > 0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.3, 20.0), st.floats(0.1, 5.0), st.floats(0.01, 1.0), st.floats(0.01, 3.0))
def test_gamma_intensity_quadrature_property(a, b, c, frac):
    spec = GammaKernel(a, b, c)
    t = frac * a * b * 2
    params = NetworkParams(100, 1.0, 1.0)
    assert cumulative_intensity(params, spec, t) == pytest.approx(
        quadrature_intensity(params, spec, t), rel=1e-9, abs=1e-300)


class TestMeanVariance:

    def test_constant_mean(self):
        assert mean_reads(NET, Constant(0.01), 10.0) == pytest.approx(500.0)

    def test_constant_variance(self):
        assert variance_reads(NET, Constant(0.01), 10.0) == pytest.approx(5000.0)

    def test_zero_time(self):
        assert mean_reads(NET, GammaKernel(2, 1, 0.5), 0.0) == 0.0
        assert variance_reads(NET, GammaKernel(2, 1, 0.5), 0.0) == 0.0

    def test_gamma_closed_form(self):
        # N c b e^a / a^a <f> gamma(a + 1, t / b), evaluated with an independent quadrature
        a, b, c, t = 3.0, 0.5, 0.05, 2.0
        g = quad(lambda u: u ** a * math.exp(-u), 0, t / b, epsrel=1e-13)[0]
        expected = NET.n_users * c * b * math.exp(a) / a ** a * NET.mean_followers * g
        assert mean_reads(NET, GammaKernel(a, b, c), t) == pytest.approx(expected, rel=1e-10)

    def test_nondecreasing(self):
        t = np.linspace(0, 30, 200)
        m = mean_reads(NET, GammaKernel(2, 3, 0.2), t)
        assert np.all(np.diff(m) >= 0)


@settings(max_examples=100, deadline=None)
@given(
    st.integers(1, 10_000),
    st.floats(0.5, 500.0),
    st.floats(1.0, 50.0),
    st.floats(0.2, 20.0), st.floats(0.05, 5.0), st.floats(0.001, 1.0),
    st.floats(0.01, 50.0),
)
def test_variance_to_mean_ratio(n, mf, spread, a, b, c, t):
    params = NetworkParams(n, mf, mf * mf * spread)
    spec = GammaKernel(a, b, c)
    mean = mean_reads(params, spec, t)
    if mean > 0:
        ratio = variance_reads(params, spec, t) / mean
        assert ratio == pytest.approx(params.mean_sq_followers / params.mean_followers, rel=1e-12)


class TestAsymptotics:

    def test_stirling_ratio_large_a(self):
        lim = asymptotic_moments(NET, GammaKernel(50.0, 1.0, 0.1))
        assert abs(lim.mean_limit_stirling / lim.mean_limit_exact - 1) <= 0.02

    def test_limit_reached(self):
        spec = GammaKernel(2.0, 1.0, 0.1)
        lim = asymptotic_moments(NET, spec)
        t = spec.a * spec.b + 40 * spec.b
        assert mean_reads(NET, spec, t) == pytest.approx(lim.mean_limit_exact, rel=1e-3)

    def test_limit_bounds_mean(self):
        spec = GammaKernel(3.0, 2.0, 0.4)
        lim = asymptotic_moments(NET, spec)
        t = np.linspace(0, 200, 300)
        assert np.all(mean_reads(NET, spec, t) <= lim.mean_limit_exact * (1 + 1e-12))

    def test_ratio(self):
        lim = asymptotic_moments(NET, GammaKernel(4.0, 1.0, 0.2))
        assert lim.var_limit_exact / lim.mean_limit_exact == pytest.approx(NET.dispersion, rel=1e-14)
        assert lim.var_limit_stirling / lim.mean_limit_stirling == pytest.approx(NET.dispersion, rel=1e-14)

    def test_stirling_form(self):
        a, b, c = 7.0, 2.0, 0.3
        lim = asymptotic_moments(NET, GammaKernel(a, b, c))
        assert lim.mean_limit_stirling == pytest.approx(
            NET.n_users * b * c * NET.mean_followers * math.sqrt(2 * math.pi * (a + 1)))

    def test_requires_gamma(self):
        with pytest.raises(UnsupportedVariantError):
            asymptotic_moments(NET, Constant(0.1))


class TestMgf:

    dist = Discrete((1, 2, 3), (0.5, 0.3, 0.2))
    spec = GammaKernel(2.0, 1.0, 0.1)

    @property
    def params(self):
        m = degree_moments(self.dist)
        return NetworkParams(50, m.mean, m.mean_sq)

    def test_s_zero(self):
        assert mgf_value(self.params, self.spec, self.dist, 0.0, 5.0) == pytest.approx(1.0, abs=1e-15)

    def test_t_zero(self):
        assert mgf_value(self.params, self.spec, self.dist, -0.7, 0.0) == 1.0

    def test_first_derivative_is_mean(self):
        h, t = 1e-5, 4.0
        deriv = (mgf_value(self.params, self.spec, self.dist, h, t)
                 - mgf_value(self.params, self.spec, self.dist, -h, t)) / (2 * h)
        assert deriv == pytest.approx(mean_reads(self.params, self.spec, t), rel=1e-6)

    def test_second_derivative_is_second_moment(self):
        h, t = 1e-4, 4.0
        m = lambda s: mgf_value(self.params, self.spec, self.dist, s, t)
        second = (m(h) - 2 * m(0.0) + m(-h)) / h ** 2
        mean = mean_reads(self.params, self.spec, t)
        expected = variance_reads(self.params, self.spec, t) + mean ** 2
        assert second == pytest.approx(expected, rel=1e-5)

    def test_solves_its_ode(self):
        # dM/dt = N (M_f(s) - 1) w(t) M, checked by a central difference in t
        s, t, h = -0.3, 2.5, 1e-5
        m = lambda tt: mgf_value(self.params, self.spec, self.dist, s, tt)
        lhs = (m(t + h) - m(t - h)) / (2 * h)
        mf = sum(p * math.exp(s * y) for y, p in zip(self.dist.support, self.dist.probs))
        rhs = self.params.n_users * (mf - 1) * evaluate_popularity(self.spec, t) * m(t)
        assert lhs == pytest.approx(rhs, rel=1e-7)

    def test_poisson_case(self):
        # unit jumps: X is Poisson(Lambda) with mgf exp(Lambda (e^s - 1))
        params = NetworkParams(100, 1.0, 1.0)
        lam = cumulative_intensity(params, Constant(0.05), 3.0)
        assert mgf_value(params, Constant(0.05), Degenerate(1), 0.2, 3.0) == pytest.approx(
            math.exp(lam * (math.exp(0.2) - 1)), rel=1e-13)


class TestConfidenceBand:

    def test_origin(self):
        band = confidence_band(NET, GammaKernel(2, 1, 0.3), [0.0, 1.0])
        assert band.band_low[0] == 0.0 and band.band_high[0] == 0.0

    def test_constant_band(self):
        band = confidence_band(NET, Constant(0.01), [10.0], level=0.95)
        half = 1.959964 * math.sqrt(5000)
        assert band.mean[0] == pytest.approx(500.0)
        assert band.band_low[0] == pytest.approx(500 - half, rel=1e-6)
        assert band.band_high[0] == pytest.approx(500 + half, rel=1e-6)

    def test_quantile(self):
        assert normal_quantile(0.95) == pytest.approx(1.959964, abs=1e-6)
        assert normal_quantile(0.6827) == pytest.approx(1.0, abs=1e-3)

    def test_level_zero_is_mean(self):
        band = confidence_band(NET, GammaKernel(2, 1, 0.3), np.linspace(0, 5, 20), level=0.0)
        assert np.array_equal(band.band_low, band.mean)
        assert np.array_equal(band.band_high, band.mean)

    @pytest.mark.parametrize("level", [-0.1, 1.0, 1.5])
    def test_invalid_level(self, level):
        with pytest.raises(DomainError):
            confidence_band(NET, Constant(0.1), [1.0], level=level)

    def test_ordering_and_floor(self):
        band = confidence_band(NetworkParams(3, 1.0, 100.0), Constant(0.01), np.linspace(0, 5, 30))
        assert np.all(band.band_low >= 0)
        assert np.all(band.band_low <= band.mean) and np.all(band.mean <= band.band_high)
        assert np.all(band.variance >= 0)

    def test_validity_flag(self):
        band = confidence_band(NetworkParams(100, 1, 1), Constant(0.1), [1.0, 10.0])
        assert band.gaussian_valid.tolist() == [False, True]
