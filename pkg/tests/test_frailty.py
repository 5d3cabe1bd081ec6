import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special, stats

from frailtyfit.frailty import (FrailtyPosterior, GammaFrailty, cluster_marginal_terms, digamma,
                                expected_log_density, laplace, laplace_value, log_density, log_laplace,
                                posterior_moments, trigamma)


def gamma_pdf(theta, z):
    return stats.gamma.pdf(z, a=1 / theta, scale=theta)


def forward_derivative(f, x, h):
    # 5-point one-sided stencil, error O(h^4)
    f0, f1, f2, f3, f4 = (f(x + k * h) for k in range(5))
    return (-25 * f0 + 48 * f1 - 36 * f2 + 16 * f3 - 3 * f4) / (12 * h)


def test_gamma_frailty_moments():
    fr = GammaFrailty(0.5)
    assert (fr.shape, fr.scale, fr.mean, fr.variance) == (2.0, 0.5, 1.0, 0.5)
    with pytest.raises(ValueError):
        GammaFrailty(0.0)


def test_laplace_at_zero_is_one():
    assert laplace(0.5, 0.0, 0) == (0.0, 1)


def test_laplace_matches_quadrature():
    val, _ = integrate.quad(lambda z: math.exp(-z) * gamma_pdf(0.5, z), 0, np.inf, epsabs=1e-13)
    assert laplace_value(0.5, 1.0, 0) == pytest.approx(val, rel=1e-10)
    assert laplace_value(0.5, 1.0, 0) == pytest.approx(4 / 9, rel=1e-14)


def test_second_derivative_matches_finite_differences():
    h = 1e-3
    fd = (laplace_value(0.5, 1 + h, 0) - 2 * laplace_value(0.5, 1, 0) + laplace_value(0.5, 1 - h, 0)) / h**2
    assert laplace_value(0.5, 1.0, 2) == pytest.approx(fd, rel=1e-5)


@pytest.mark.parametrize("q", range(0, 6))
def test_derivative_matches_moment_integral(q):
    # L^(q)(s) = (-1)^q E[z^q e^{-sz}]
    theta, s = 0.7, 2.3
    val, _ = integrate.quad(lambda z: z**q * math.exp(-s * z) * gamma_pdf(theta, z), 0, np.inf,
                            epsabs=1e-14, epsrel=1e-12)
    assert laplace_value(theta, s, q) == pytest.approx((-1) ** q * val, rel=1e-8)


@given(st.floats(0.05, 5.0), st.floats(0.0, 50.0), st.integers(1, 10))
def test_laplace_derivatives_vs_finite_differences(theta, s, q):
    scale = (1 + theta * s) / (1 + q * theta)
    fd = forward_derivative(lambda x: laplace_value(theta, x, q - 1), s, 1e-3 * scale)
    exact = laplace_value(theta, s, q)
    assert abs(fd - exact) <= 1e-5 * abs(exact)


@given(st.floats(0.01, 10.0), st.floats(0.0, 1e4), st.integers(0, 200))
def test_complete_monotonicity(theta, s, q):
    logmag, sign = laplace(theta, s, q)
    assert sign == (-1) ** q
    assert math.isfinite(logmag)


def test_large_order_does_not_overflow():
    logmag, _ = laplace(0.5, 10.0, 80)
    # closed form of the rising product through log-gamma
    k = 2.0
    expected = -(k + 80) * math.log(6.0) + 80 * math.log(0.5) + math.lgamma(k + 80) - math.lgamma(k)
    assert logmag == pytest.approx(expected, rel=1e-12)
    assert laplace(0.5, 0.0, 400)[0] > 709  # the direct product would overflow


def test_laplace_domain_errors():
    with pytest.raises(ValueError):
        laplace(0.0, 1.0, 0)
    with pytest.raises(ValueError):
        laplace(-1.0, 1.0, 0)
    with pytest.raises(ValueError):
        laplace(0.5, -1.0, 0)
    with pytest.raises(ValueError):
        laplace(0.5, 1.0, -1)


def test_posterior_prior_case():
    ez, elogz = posterior_moments(0.5, 0, 0.0)
    assert ez == 1.0
    assert elogz == pytest.approx(special.digamma(2.0) - math.log(2.0), abs=1e-13)


def _posterior_quad(theta, d, H, fn):
    shape, rate = 1 / theta + d, 1 / theta + H
    # integrate over u = log z, where the density a u + a log b - lgamma(a) - b e^u is smooth;
    # on the z scale it is singular at 0 when shape < 1
    logdens = lambda u: shape * u + shape * math.log(rate) - math.lgamma(shape) - rate * math.exp(u)
    lo = special.digamma(shape) - math.log(rate) - 40.0 / shape - 10.0
    hi = math.log((shape + 40.0 * math.sqrt(shape) + 40.0) / rate)
    val, _ = integrate.quad(lambda u: fn(math.exp(u)) * math.exp(logdens(u)), lo, hi,
                            epsabs=1e-13, epsrel=1e-12, limit=400)
    return val


def test_posterior_moments_quadrature_example():
    ez, elogz = posterior_moments(0.5, 2, 1.0)
    assert ez == pytest.approx(4 / 3, abs=1e-15)
    assert abs(ez - _posterior_quad(0.5, 2, 1.0, lambda z: z)) < 1e-8
    assert abs(elogz - _posterior_quad(0.5, 2, 1.0, np.log)) < 1e-8
    assert elogz == pytest.approx(special.digamma(4) - math.log(3), abs=1e-13)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@given(st.floats(0.05, 5.0), st.integers(0, 30), st.floats(0.0, 40.0))
def test_posterior_mean_vs_quadrature(theta, d, H):
    ez, elogz = posterior_moments(theta, d, H)
    assert abs(ez - _posterior_quad(theta, d, H, lambda z: z)) < 1e-8
    assert abs(elogz - _posterior_quad(theta, d, H, math.log)) < 1e-8


def test_posterior_vectorized_and_dataclass():
    ez, elogz = posterior_moments(0.5, np.array([0, 2]), np.array([0.0, 1.0]))
    np.testing.assert_allclose(ez, [1.0, 4 / 3])
    post = FrailtyPosterior.from_cluster(0.5, 2, 1.0)
    assert (post.shape, post.rate) == (4.0, 3.0)
    assert post.mean == pytest.approx(4 / 3)


def test_posterior_domain_error():
    with pytest.raises(ValueError):
        posterior_moments(0.0, 1, 1.0)


@given(st.floats(1e-3, 1e4))
def test_digamma_trigamma_against_scipy(x):
    assert digamma(x) == pytest.approx(special.digamma(x), rel=1e-12, abs=1e-12)
    assert trigamma(x) == pytest.approx(special.polygamma(1, x), rel=1e-12)


def test_log_density_exponential_case():
    assert log_density(1.0, 1.0) == pytest.approx(-1.0, abs=1e-15)


def test_log_density_normalized():
    total, _ = integrate.quad(lambda z: math.exp(log_density(0.5, z)), 0, np.inf, epsabs=1e-13)
    assert abs(total - 1) < 1e-8


@pytest.mark.parametrize("theta", [0.25, 0.5, 2.0])
def test_log_density_mean_and_variance(theta):
    m1, _ = integrate.quad(lambda z: z * math.exp(log_density(theta, z)), 0, np.inf, epsabs=1e-13, limit=200)
    m2, _ = integrate.quad(lambda z: z * z * math.exp(log_density(theta, z)), 0, np.inf, epsabs=1e-13,
                           limit=200)
    assert abs(m1 - 1) < 1e-8
    assert abs(m2 - m1**2 - theta) < 1e-7


def test_log_density_domain_errors():
    with pytest.raises(ValueError):
        log_density(0.5, 0.0)
    with pytest.raises(ValueError):
        log_density(-0.5, 1.0)


def test_expected_log_density_matches_pointwise():
    z = np.array([0.3, 1.2, 2.5])
    assert expected_log_density(0.7, z, np.log(z)) == pytest.approx(float(np.sum(log_density(0.7, z))))


@given(st.floats(0.05, 5.0), st.integers(0, 20), st.floats(0.0, 30.0))
def test_cluster_terms_consistent(theta, d, s):
    value, dds, dlt = cluster_marginal_terms(theta, np.array([d]), np.array([s]))
    assert value[0] == pytest.approx(log_laplace(theta, s, d), rel=1e-12, abs=1e-12)
    assert dds[0] == pytest.approx(-posterior_moments(theta, d, s)[0], rel=1e-12)
    h = 1e-5
    f = lambda lt: cluster_marginal_terms(math.exp(lt), np.array([d]), np.array([s]))[0][0]
    fd = (f(math.log(theta) + h) - f(math.log(theta) - h)) / (2 * h)
    assert dlt[0] == pytest.approx(fd, rel=1e-5, abs=1e-6)
