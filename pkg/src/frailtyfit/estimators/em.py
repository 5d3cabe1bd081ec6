"""EM algorithm for the semiparametric shared gamma frailty model."""

from __future__ import annotations

import math
import time

import numpy as np
from scipy.optimize import brentq

from ..baseline import StepCumulativeHazard, breslow_increments
from ..data import ClusteredSurvivalData, build_risk_sets
from ..frailty import digamma, posterior_moments
from .base import FitConfig, FrailtyFit, classify, sqrt_diag_inverse
from .cox import newton_partial_likelihood
from .semiparametric import SemiparametricModel


def theta_mstep(ez: np.ndarray, elogz: np.ndarray, bounds: tuple[float, float]) -> float:
    """Maximize ``sum_i E[log f(z_i | theta)]`` over theta.

    With ``k = 1/theta`` the score equation is
    ``log k - digamma(k) = mean(E[z] - E[log z]) - 1``; the left side falls
    monotonically from +inf to 0 and the right side is nonnegative by Jensen,
    so the root is unique. It is clipped to ``bounds``.
    """
    lo, hi = bounds
    rhs = float(np.mean(ez - elogz)) - 1.0

    def f(log_k):
        k = math.exp(log_k)
        return math.log(k) - digamma(k) - rhs

    lk_lo, lk_hi = -math.log(hi), -math.log(lo)
    if f(lk_hi) >= 0:
        return lo
    if f(lk_lo) <= 0:
        return hi
    log_k = brentq(f, lk_lo, lk_hi, xtol=1e-12, rtol=1e-12)
    return min(max(math.exp(-log_k), lo), hi)


def fit_em(data: ClusteredSurvivalData, cfg: FitConfig = FitConfig()) -> FrailtyFit:
    """Fit by EM: Breslow baseline and gamma posterior frailty moments.

    E-step: posterior ``E[z_i]`` and ``E[log z_i]`` from the current baseline.
    M-step: Newton on the partial likelihood with offsets ``log E[z_i]``,
    Breslow jumps with frailty weights ``E[z_i]``, and a 1-D update of theta.
    Convergence is monitored on the marginal log-likelihood.
    """
    t0 = time.perf_counter()
    risk = build_risk_sets(data)
    model = SemiparametricModel(data, risk)
    d_cluster = model.d_cluster

    cox = newton_partial_likelihood(data, risk, np.zeros(data.n), np.zeros(data.p), cfg, model.pl)
    beta = cox.beta
    theta = cfg.theta_init
    inc = breslow_increments(risk, data.X @ beta)
    trace = [model.marginal_loglik(beta, theta, inc)]

    tolerance_met = False
    inner_ok = True
    it = 0
    for it in range(1, cfg.max_outer_iters + 1):
        H = model.cluster_cumhaz(beta, inc)
        ez, elogz = posterior_moments(theta, d_cluster, H)
        offsets = np.log(ez)[data.cluster]
        nr = newton_partial_likelihood(data, risk, offsets, beta, cfg, model.pl)
        inner_ok &= nr.converged
        new_beta = nr.beta
        inc = breslow_increments(risk, data.X @ new_beta + offsets)
        new_theta = theta_mstep(ez, elogz, cfg.theta_bounds)
        ll = model.marginal_loglik(new_beta, new_theta, inc)
        dparam = max(float(np.max(np.abs(new_beta - beta))), abs(new_theta - theta))
        dll = abs(ll - trace[-1])
        beta, theta = new_beta, new_theta
        trace.append(ll)
        if dll < cfg.tol_loglik * abs(ll) and dparam < cfg.tol_param:
            tolerance_met = True
            break
        if np.max(np.abs(beta)) > cfg.divergence_guard:
            break

    H = model.cluster_cumhaz(beta, inc)
    ez, _ = posterior_moments(theta, d_cluster, H)
    u = np.log(ez)
    info = model.penalized(beta, u, theta)[2]
    se_all = sqrt_diag_inverse(info)
    se_beta = None if se_all is None else se_all[: data.p]
    se_theta, _ = model.se_theta_from_profile(theta, beta, u)

    fit = FrailtyFit(
        method="em",
        beta=beta,
        theta=theta,
        se_beta=se_beta,
        se_theta=se_theta,
        baseline=StepCumulativeHazard(risk.event_times, inc),
        loglik=trace[-1],
        loglik_trace=trace,
        n_iters=it,
        frailties=ez,
    )
    if not inner_ok:
        fit.diagnostics.append("an M-step Newton solve hit its iteration limit")
    fit.wall_time = time.perf_counter() - t0
    return classify(fit, cfg, tolerance_met and inner_ok)
