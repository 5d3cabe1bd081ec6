"""Gamma-frailty marginal likelihood with a step baseline, and its profile in theta.

For a fixed ``theta`` the penalized partial likelihood

    l_part(beta, u) + sum_i log f_U(u_i | theta),   u_i = log z_i,

has a stationary point where ``exp(u_i)`` equals the posterior mean frailty
computed from the Breslow baseline at ``(beta, u)``. That point is also the
maximizer of the marginal likelihood over ``(beta, H0)`` at this ``theta``, so
evaluating the marginal likelihood there gives the profile log-likelihood of
``theta``.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional

import numpy as np

from ..baseline import breslow_increments, cumhaz_at_subjects
from ..data import ClusteredSurvivalData, RiskSetIndex
from ..frailty import cluster_marginal_terms
from .base import newton_direction
from .cox import PartialLikelihood, _revcumsum


class FixedThetaSolution(NamedTuple):
    beta: np.ndarray
    u: np.ndarray
    increments: np.ndarray
    profile_loglik: float
    penalized_loglik: float
    converged: bool
    n_iter: int


class SemiparametricModel:
    def __init__(self, data: ClusteredSurvivalData, risk: RiskSetIndex):
        self.data = data
        self.risk = risk
        self.pl = PartialLikelihood(data, risk)
        self.d_cluster = data.events_per_cluster
        self.d = risk.deaths.astype(float)
        self.log_d = np.log(self.d)
        p, g = data.p, data.g
        Z = np.zeros((data.n, p + g))
        Z[:, :p] = data.X
        Z[np.arange(data.n), p + data.cluster] = 1.0
        self.Z = Z
        self.Zs = Z[risk.order]
        self.event_z = Z[data.status == 1].sum(axis=0)

    # -- marginal likelihood -------------------------------------------------

    def cluster_cumhaz(self, beta, increments) -> np.ndarray:
        """``H_i = sum_j H0(y_ij) exp(beta'x_ij)`` per cluster."""
        H0 = cumhaz_at_subjects(self.risk, increments)
        return np.bincount(self.data.cluster, weights=H0 * np.exp(self.data.X @ beta),
                           minlength=self.data.g)

    def marginal_loglik(self, beta, theta: float, increments) -> float:
        """Marginal log-likelihood with the baseline hazard jumps as parameters.

        ``sum_v d_v log h_v + sum delta beta'x + sum_i log[(-1)^d_i L^(d_i)(H_i)]``.
        """
        data = self.data
        s = self.cluster_cumhaz(beta, increments)
        terms, _, _ = cluster_marginal_terms(theta, self.d_cluster, s)
        return float(self.d @ np.log(increments) + self.pl.event_x @ beta + terms.sum())

    def posterior_mean(self, beta, theta, increments) -> np.ndarray:
        s = self.cluster_cumhaz(beta, increments)
        return (1.0 / theta + self.d_cluster) / (1.0 / theta + s)

    # -- penalized partial likelihood in (beta, u) ---------------------------

    def penalized(self, beta, u, theta: float, derivatives: bool = True):
        """``l_part + sum_i (u_i - e^u_i)/theta`` with gradient and information.

        Constants of the log-gamma density are dropped.
        """
        data, risk = self.data, self.risk
        eta = data.X @ beta + u[data.cluster]
        shift = float(eta.max())
        w = np.exp(eta - shift)
        ws = w[risk.order]
        s0 = _revcumsum(ws)[risk.start]
        eu = np.exp(u)
        val = float(eta[data.status == 1].sum() - self.d @ (np.log(s0) + shift)
                    + np.sum(u - eu) / theta)
        if not derivatives:
            return val
        p = data.p
        s1 = _revcumsum(ws[:, None] * self.Zs)[risk.start]
        m = s1 / s0[:, None]
        grad = self.event_z - self.d @ m
        grad[p:] += (1.0 - eu) / theta
        lam = np.concatenate(([0.0], np.cumsum(self.d / s0)))[risk.n_known]
        c = w * lam
        info = (self.Z * c[:, None]).T @ self.Z - (m * self.d[:, None]).T @ m
        idx = np.arange(p, p + data.g)
        info[idx, idx] += eu / theta
        return val, grad, info

    def solve_fixed_theta(self, theta: float, beta0, u0=None, max_iter: int = 50,
                          tol: float = 1e-7) -> FixedThetaSolution:
        """Maximize the penalized partial likelihood jointly in ``(beta, u)``.

        Newton-Raphson on the joint parameter with step halving; stops when
        the penalized log-likelihood gain falls under ``tol`` and the Newton
        decrement is negligible.
        """
        data = self.data
        p = data.p
        beta = np.array(beta0, dtype=float)
        if u0 is None:
            inc = breslow_increments(self.risk, data.X @ beta)
            u = np.log(self.posterior_mean(beta, theta, inc))
        else:
            u = np.array(u0, dtype=float)
        val, grad, info = self.penalized(beta, u, theta)
        converged = False
        it = 0
        for it in range(1, max_iter + 1):
            step, _ = newton_direction(info, grad)
            decrement = float(grad @ step)
            if decrement < 1e-11 * max(1.0, abs(val)):
                converged = True
                break
            for _ in range(40):
                nb, nu = beta + step[:p], u + step[p:]
                nval = self.penalized(nb, nu, theta, derivatives=False)
                if np.isfinite(nval) and nval >= val - 1e-12 * abs(val):
                    break
                step = step / 2
            else:
                break
            gain = nval - val
            beta, u = nb, nu
            val, grad, info = self.penalized(beta, u, theta)
            if abs(gain) < tol * 1e-3 and decrement < 1e-9 * max(1.0, abs(val)):
                converged = True
                break
        inc = breslow_increments(self.risk, data.X @ beta + u[data.cluster])
        prof = self.marginal_loglik(beta, theta, inc)
        return FixedThetaSolution(beta, u, inc, prof, val, converged, it)

    # -- profile curvature ---------------------------------------------------

    def se_theta_from_profile(self, theta_hat: float, beta, u) -> tuple[Optional[float], Optional[float]]:
        """SE of theta from a 5-point second difference of the profile log-likelihood.

        Step ``1e-3 * max(theta_hat, 0.1)``. Returns ``(se, curvature)``;
        ``se`` is ``None`` when the curvature is not negative.
        """
        h = 1e-3 * max(theta_hat, 0.1)
        if theta_hat - 2 * h <= 0:
            return None, None
        vals = {}
        for k in (-2, -1, 0, 1, 2):
            sol = self.solve_fixed_theta(theta_hat + k * h, beta, u)
            vals[k] = sol.profile_loglik
        curv = (-vals[2] + 16 * vals[1] - 30 * vals[0] + 16 * vals[-1] - vals[-2]) / (12 * h * h)
        if not np.isfinite(curv) or curv >= 0:
            return None, curv
        return 1.0 / math.sqrt(-curv), curv


def log_gamma_penalty_const(theta: float, g: int) -> float:
    """Constant part of ``sum_i log f_U(u_i | theta)`` dropped in ``penalized``."""
    k = 1.0 / theta
    return g * (k * math.log(k) - math.lgamma(k))
