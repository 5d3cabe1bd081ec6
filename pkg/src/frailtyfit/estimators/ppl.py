"""Penalized partial likelihood with a profiled marginal likelihood for theta.

Inner loop: for a given theta, maximize the gamma-penalized partial likelihood
in ``(beta, u)``. Outer loop: bounded Brent search of the profile marginal
log-likelihood over ``log theta``.
"""

from __future__ import annotations

import math
import time

import numpy as np
from scipy.optimize import minimize_scalar

from ..baseline import StepCumulativeHazard
from ..data import ClusteredSurvivalData, build_risk_sets
from .base import FitConfig, FrailtyFit, classify, sqrt_diag_inverse
from .cox import newton_partial_likelihood
from .semiparametric import SemiparametricModel, log_gamma_penalty_const


def fit_ppl(data: ClusteredSurvivalData, cfg: FitConfig = FitConfig()) -> FrailtyFit:
    t0 = time.perf_counter()
    risk = build_risk_sets(data)
    model = SemiparametricModel(data, risk)
    cox = newton_partial_likelihood(data, risk, np.zeros(data.n), np.zeros(data.p), cfg, model.pl)

    state = {"beta": cox.beta, "u": None}
    trace: list[float] = []
    solutions: dict[float, object] = {}
    inner_failures = []

    def neg_profile(log_theta: float) -> float:
        theta = math.exp(log_theta)
        sol = model.solve_fixed_theta(theta, state["beta"], state["u"], max_iter=cfg.max_inner_iters)
        if not sol.converged:
            inner_failures.append(theta)
        state["beta"], state["u"] = sol.beta, sol.u
        solutions[log_theta] = sol
        trace.append(sol.profile_loglik)
        return -sol.profile_loglik

    lo, hi = cfg.log_theta_bounds
    neg_profile(math.log(cfg.theta_init))
    res = minimize_scalar(neg_profile, bounds=(lo, hi), method="bounded",
                          options={"xatol": cfg.tol_param, "maxiter": cfg.max_outer_iters})

    best = min(solutions, key=lambda k: -solutions[k].profile_loglik)
    sol = solutions[best]
    theta = math.exp(best)
    if not sol.converged:
        sol = model.solve_fixed_theta(theta, sol.beta, sol.u, max_iter=4 * cfg.max_inner_iters)

    info = model.penalized(sol.beta, sol.u, theta)[2]
    se_all = sqrt_diag_inverse(info)
    se_beta = None if se_all is None else se_all[: data.p]
    se_theta, _ = model.se_theta_from_profile(theta, sol.beta, sol.u)

    fit = FrailtyFit(
        method="ppl",
        beta=sol.beta,
        theta=theta,
        se_beta=se_beta,
        se_theta=se_theta,
        baseline=StepCumulativeHazard(risk.event_times, sol.increments),
        loglik=sol.profile_loglik,
        loglik_trace=trace,
        n_iters=int(res.nfev),
    )
    fit.extras["penalized_loglik"] = sol.penalized_loglik + log_gamma_penalty_const(theta, data.g)
    fit.frailties = np.exp(sol.u)
    tolerance_met = bool(res.success) and sol.converged
    if inner_failures:
        fit.diagnostics.append(f"inner loop hit iteration limit {len(inner_failures)} time(s)")
    fit.wall_time = time.perf_counter() - t0
    return classify(fit, cfg, tolerance_met)
