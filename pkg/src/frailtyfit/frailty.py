"""Gamma frailty with unit mean and variance ``theta``.

The frailty ``z`` has shape ``1/theta`` and scale ``theta``. Laplace
transform derivatives are kept as (log-magnitude, sign) pairs since the
derivative order equals the number of events in a cluster and the raw values
under/overflow quickly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _check_theta(theta):
    if np.any(np.asarray(theta) <= 0) or not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite and > 0")


@dataclass(frozen=True)
class GammaFrailty:
    theta: float

    def __post_init__(self):
        _check_theta(self.theta)

    @property
    def shape(self) -> float:
        return 1.0 / self.theta

    @property
    def scale(self) -> float:
        return self.theta

    @property
    def mean(self) -> float:
        return 1.0

    @property
    def variance(self) -> float:
        return self.theta


@dataclass(frozen=True)
class FrailtyPosterior:
    """Gamma posterior of a cluster frailty given its data."""

    shape: float
    rate: float

    @classmethod
    def from_cluster(cls, theta: float, d_i: int, H_i: float) -> "FrailtyPosterior":
        _check_theta(theta)
        return cls(1.0 / theta + d_i, 1.0 / theta + H_i)

    @property
    def mean(self) -> float:
        return self.shape / self.rate


# Bernoulli-number coefficients of the digamma asymptotic series in 1/x^2.
_DIGAMMA_SERIES = (
    1.0 / 12,
    -1.0 / 120,
    1.0 / 252,
    -1.0 / 240,
    1.0 / 132,
    -691.0 / 32760,
    1.0 / 12,
    -3617.0 / 8160,
)


def digamma(x):
    """Digamma function for positive arguments.

    Shifts the argument above 6 with ``psi(x) = psi(x + 1) - 1/x`` and then
    evaluates the 8-term asymptotic expansion.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("digamma is only implemented for x > 0")
    shift = np.zeros_like(x)
    y = x.copy()
    while True:
        small = y < 6.0
        if not small.any():
            break
        shift = np.where(small, shift + 1.0 / y, shift)
        y = np.where(small, y + 1.0, y)
    inv2 = 1.0 / (y * y)
    series = np.zeros_like(y)
    for c in reversed(_DIGAMMA_SERIES):
        series = (series + c) * inv2
    out = np.log(y) - 0.5 / y - series - shift
    return out if out.ndim else float(out)


def trigamma(x):
    """Trigamma for positive arguments (recurrence + asymptotic series)."""
    x = np.asarray(x, dtype=float)
    shift = np.zeros_like(x)
    y = x.copy()
    while True:
        small = y < 10.0
        if not small.any():
            break
        shift = np.where(small, shift + 1.0 / (y * y), shift)
        y = np.where(small, y + 1.0, y)
    inv = 1.0 / y
    inv2 = inv * inv
    # 1/y + 1/(2y^2) + sum B_2k / y^(2k+1)
    series = inv2 * (1.0 / 6 + inv2 * (-1.0 / 30 + inv2 * (1.0 / 42 + inv2 * (-1.0 / 30 + inv2 * 5.0 / 66))))
    out = inv + 0.5 * inv2 + inv * series + shift
    return out if out.ndim else float(out)


def _log_rising(theta, q):
    """``sum_{k<q} log(1 + k theta)`` for integer ``q`` (scalar or array)."""
    q = np.asarray(q, dtype=np.int64)
    qmax = int(q.max()) if q.size else 0
    if qmax == 0:
        return np.zeros(q.shape)
    table = np.concatenate(([0.0], np.cumsum(np.log1p(np.arange(qmax) * theta))))
    return table[q]


def log_laplace(theta, s, q):
    """Log-magnitude of the ``q``-th derivative of the Laplace transform.

    Returns ``log |L^(q)(s)|``; the sign is ``(-1)^q``. Works elementwise on
    arrays of ``s`` and ``q`` for a scalar ``theta``.
    """
    _check_theta(theta)
    s = np.asarray(s, dtype=float)
    q = np.asarray(q, dtype=np.int64)
    if np.any(s < 0) or np.any(q < 0):
        raise ValueError("s and q must be nonnegative")
    out = -(1.0 / theta + q) * np.log1p(theta * s) + _log_rising(theta, q)
    return out if out.ndim else float(out)


def laplace(theta: float, s: float, q: int = 0) -> tuple[float, int]:
    """``q``-th derivative of ``L(s) = (1 + theta s)^(-1/theta)``.

    Returns
    -------
    (log_magnitude, sign)
        ``L^(q)(s) = sign * exp(log_magnitude)`` with ``sign = (-1)^q``.
    """
    if q < 0 or int(q) != q:
        raise ValueError("q must be a nonnegative integer")
    return log_laplace(theta, s, int(q)), (-1) ** int(q)


def laplace_value(theta: float, s: float, q: int = 0) -> float:
    logmag, sign = laplace(theta, s, q)
    return sign * math.exp(logmag)


def posterior_moments(theta, d_i, H_i):
    """Posterior ``E[z]`` and ``E[log z]`` of a cluster frailty.

    The posterior is gamma with shape ``1/theta + d_i`` and rate
    ``1/theta + H_i``, where ``H_i`` is the cluster's summed cumulative hazard
    ``sum_j H0(y_ij) exp(beta'x_ij)``.
    """
    _check_theta(theta)
    d_i = np.asarray(d_i, dtype=float)
    H_i = np.asarray(H_i, dtype=float)
    if np.any(d_i < 0) or np.any(H_i < 0):
        raise ValueError("d_i and H_i must be nonnegative")
    shape = 1.0 / theta + d_i
    rate = 1.0 / theta + H_i
    ez = shape / rate
    elogz = digamma(shape) - np.log(rate)
    if ez.ndim == 0:
        return float(ez), float(elogz)
    return ez, elogz


def log_density(theta: float, z):
    """Log density of the gamma frailty (shape ``1/theta``, scale ``theta``)."""
    _check_theta(theta)
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("z must be > 0")
    k = 1.0 / theta
    out = (k - 1.0) * np.log(z) - z * k - math.lgamma(k) + k * math.log(k)
    return out if out.ndim else float(out)


def expected_log_density(theta: float, ez, elogz) -> float:
    """``sum_i E[log f(z_i | theta)]`` given posterior moments."""
    k = 1.0 / theta
    g = np.size(ez)
    return float((k - 1.0) * np.sum(elogz) - k * np.sum(ez) - g * (math.lgamma(k) - k * math.log(k)))


def cluster_marginal_terms(theta: float, d, s):
    """Per-cluster ``log[(-1)^d L^(d)(s)]`` and its derivatives.

    Returns
    -------
    value : ndarray
        ``-(1/theta + d) log(1 + theta s) + sum_{k<d} log(1 + k theta)``.
    dvalue_ds : ndarray
        Derivative in ``s``; equals ``-E[z | d, s]``.
    dvalue_dlogtheta : ndarray
        Derivative in ``log theta``.
    """
    d = np.asarray(d)
    s = np.asarray(s, dtype=float)
    ts = theta * s
    l1p = np.log1p(ts)
    value = -(1.0 / theta + d) * l1p + _log_rising(theta, d)
    dds = -(1.0 + theta * d) / (1.0 + ts)
    qmax = int(d.max()) if d.size else 0
    ks = np.arange(qmax)
    rising_d = np.concatenate(([0.0], np.cumsum(ks * theta / (1.0 + ks * theta))))[d]
    # theta * d/dtheta of -(1/theta + d) log(1 + theta s)
    dlt = l1p / theta - (1.0 / theta + d) * ts / (1.0 + ts) + rising_d
    return value, dds, dlt
