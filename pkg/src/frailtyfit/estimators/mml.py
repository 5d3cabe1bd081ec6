"""Maximum marginal likelihood with a Weibull baseline hazard.

Frailties are integrated out analytically through Laplace-transform
derivatives; the optimization runs over ``(log alpha, log lambda, beta,
log theta)``.
"""

from __future__ import annotations

import math
import time

import numpy as np
from scipy.optimize import minimize

from ..data import ClusteredSurvivalData
from ..frailty import cluster_marginal_terms
from .base import FitConfig, FrailtyFit, WeibullBaseline, classify, inverse_information


class WeibullMarginal:
    """Marginal log-likelihood of the Weibull shared gamma frailty model."""

    def __init__(self, data: ClusteredSurvivalData):
        self.data = data
        self.logy = np.log(data.time)
        self.delta = data.status.astype(float)
        self.n_events = float(self.delta.sum())
        self.event_logy = float(self.delta @ self.logy)
        self.event_x = data.X[data.status == 1].sum(axis=0)
        self.d_cluster = data.events_per_cluster
        self.p = data.p

    def unpack(self, params):
        p = self.p
        return params[0], params[1], params[2:2 + p], params[2 + p]

    def loglik(self, params, with_grad: bool = False):
        data = self.data
        log_alpha, log_lam, beta, log_theta = self.unpack(params)
        alpha, theta = math.exp(log_alpha), math.exp(log_theta)
        lin = data.X @ beta
        Hj = np.exp(log_lam + alpha * self.logy + lin)  # lambda y^alpha e^{beta'x}
        s = np.bincount(data.cluster, weights=Hj, minlength=data.g)
        terms, dds, dlt = cluster_marginal_terms(theta, self.d_cluster, s)
        ll = (self.n_events * (log_lam + log_alpha) + (alpha - 1.0) * self.event_logy
              + float(self.event_x @ beta) + float(terms.sum()))
        if not with_grad:
            return ll
        wj = dds[data.cluster] * Hj  # dll/ds_i * dH_ij
        g_la = self.n_events + alpha * self.event_logy + alpha * float(wj @ self.logy)
        g_ll = self.n_events + float(wj.sum())
        g_b = self.event_x + wj @ data.X
        g_lt = float(dlt.sum())
        return ll, np.concatenate(([g_la, g_ll], g_b, [g_lt]))

    def weibull_loglik(self, params):
        """No-frailty Weibull regression log-likelihood; params ``(log a, log l, beta)``."""
        data = self.data
        p = self.p
        log_alpha, log_lam, beta = params[0], params[1], params[2:2 + p]
        alpha = math.exp(log_alpha)
        lin = data.X @ beta
        Hj = np.exp(log_lam + alpha * self.logy + lin)
        ll = (self.n_events * (log_lam + log_alpha) + (alpha - 1.0) * self.event_logy
              + float(self.event_x @ beta) - float(Hj.sum()))
        g_la = self.n_events + alpha * self.event_logy - alpha * float(Hj @ self.logy)
        g_ll = self.n_events - float(Hj.sum())
        g_b = self.event_x - Hj @ data.X
        return ll, np.concatenate(([g_la, g_ll], g_b))


def numerical_hessian(grad, x: np.ndarray, rel_step: float = 1e-4) -> np.ndarray:
    """Symmetrized central-difference Jacobian of an analytic gradient."""
    k = x.shape[0]
    H = np.empty((k, k))
    for i in range(k):
        h = rel_step * max(1.0, abs(x[i]))
        e = np.zeros(k)
        e[i] = h
        H[:, i] = (grad(x + e) - grad(x - e)) / (2 * h)
    return 0.5 * (H + H.T)


def _weibull_start(model: WeibullMarginal) -> np.ndarray:
    data = model.data
    x0 = np.zeros(2 + model.p)
    x0[1] = math.log(model.n_events / data.time.sum())
    res = minimize(lambda x: tuple(-v for v in model.weibull_loglik(x)), x0, jac=True, method="BFGS",
                   options={"gtol": 1e-8, "maxiter": 500})
    return res.x


def fit_mml(data: ClusteredSurvivalData, cfg: FitConfig = FitConfig()) -> FrailtyFit:
    t0 = time.perf_counter()
    model = WeibullMarginal(data)
    start = _weibull_start(model)
    x0 = np.concatenate((start, [math.log(cfg.theta_init)]))
    lo, hi = cfg.log_theta_bounds
    bounds = [(None, None)] * (2 + data.p) + [(lo, hi)]

    trace = [model.loglik(x0)]

    def objective(x):
        ll, g = model.loglik(x, with_grad=True)
        return -ll, -g

    res = minimize(objective, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                   callback=lambda xk: trace.append(model.loglik(xk)),
                   options={"maxiter": cfg.max_outer_iters, "ftol": 1e-14, "gtol": 1e-7})
    x = res.x
    log_alpha, log_lam, beta, log_theta = model.unpack(x)
    alpha, lam, theta = math.exp(log_alpha), math.exp(log_lam), math.exp(log_theta)
    ll_hat = model.loglik(x)

    H = numerical_hessian(lambda v: model.loglik(v, with_grad=True)[1], x)
    se_beta = se_theta = se_base = None
    diagnostics = []
    cov = inverse_information(-H)
    if cov is not None:
        se = np.sqrt(np.diag(cov))
        se_beta = se[2:2 + data.p]
        se_theta = theta * se[-1]
        se_base = {"alpha": alpha * se[0], "lambda": lam * se[1]}
    else:
        diagnostics.append("Hessian singular or not negative definite at optimum; SEs omitted")

    grad_norm = float(np.max(np.abs(model.loglik(x, with_grad=True)[1][:-1])))
    fit = FrailtyFit(
        method="mml",
        beta=np.asarray(beta, dtype=float),
        theta=theta,
        se_beta=se_beta,
        se_theta=se_theta,
        baseline=WeibullBaseline(alpha, lam),
        loglik=ll_hat,
        loglik_trace=trace,
        n_iters=int(res.nit),
        diagnostics=diagnostics,
        se_baseline=se_base,
    )
    fit.extras["optimizer_message"] = str(res.message)
    fit.extras["grad_norm"] = grad_norm
    tolerance_met = bool(res.success) and grad_norm < 1e-3
    fit.wall_time = time.perf_counter() - t0
    return classify(fit, cfg, tolerance_met)
