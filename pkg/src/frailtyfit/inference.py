"""Confidence intervals for regression coefficients and the frailty variance.

Two intervals are offered for theta: the plain Wald interval, and a Wald
interval on ``log theta`` mapped back, using ``SE(log theta) = SE(theta) / theta``.
The latter is always positive and is asymmetric around the estimate.
"""

from __future__ import annotations

import math
from typing import NamedTuple

# Acklam's rational approximation to the standard normal quantile
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
               ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    if p > 1.0 - _P_LOW:
        return -_acklam(1.0 - p)
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
           (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)


def norm_ppf(p: float) -> float:
    """Standard normal quantile.

    Acklam's approximation (relative error about 1e-9) followed by one Halley
    step against ``erfc``, which brings the error to machine level.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    x = _acklam(p)
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def z_value(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    return norm_ppf(0.5 * (1.0 + level))


class ConfidenceInterval(NamedTuple):
    lower: float
    upper: float
    level: float
    kind: str  # "wald" or "log_wald"

    def width(self) -> float:
        return self.upper - self.lower


def ci_wald(estimate: float, se: float, level: float = 0.95) -> ConfidenceInterval:
    """``estimate +/- z * se``."""
    if not se > 0:
        raise ValueError("se must be > 0")
    z = z_value(level)
    return ConfidenceInterval(estimate - z * se, estimate + z * se, level, "wald")


def ci_log_theta(theta_hat: float, se_theta: float, level: float = 0.95) -> ConfidenceInterval:
    """Wald interval for ``log theta`` transformed back to the theta scale."""
    if not theta_hat > 0 or not se_theta > 0:
        raise ValueError("theta_hat and se_theta must be > 0")
    z = z_value(level)
    s = se_theta / theta_hat
    log_t = math.log(theta_hat)
    upper = math.exp(log_t + z * s) if log_t + z * s < 709.0 else math.inf
    return ConfidenceInterval(math.exp(log_t - z * s), upper, level, "log_wald")


def covers(ci: ConfidenceInterval, truth: float) -> int:
    """1 if ``truth`` lies in the closed interval, else 0."""
    return int(ci.lower <= truth <= ci.upper)
