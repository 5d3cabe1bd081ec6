"""Pseudo full likelihood estimation.

Given ``(beta, theta)`` the baseline hazard is built in a single forward pass
over the ordered event times. The jump at ``tau_v`` is

    d_v / sum_i psi_i(tau_{v-1}) * sum_{j in i, y_ij >= tau_v} exp(beta'x_ij),

where ``psi_i(t)`` is the posterior mean frailty of cluster ``i`` given its
events and cumulative hazard accrued up to ``t``. With that baseline held
fixed, the full log-likelihood is maximized in ``(beta, log theta)``; the two
steps alternate until the estimates stop moving.
"""

from __future__ import annotations

import math
import time

import numpy as np
from scipy.optimize import minimize

from ..baseline import StepCumulativeHazard, cumhaz_at_subjects
from ..data import ClusteredSurvivalData, RiskSetIndex, build_risk_sets
from ..frailty import cluster_marginal_terms
from .base import FitConfig, FrailtyFit, inverse_information, classify
from .cox import newton_partial_likelihood


class PseudoFullLikelihood:
    def __init__(self, data: ClusteredSurvivalData, risk: RiskSetIndex):
        self.data = data
        self.risk = risk
        r, g = risk.r, data.g
        in_risk = risk.n_known > 0
        self._rows = risk.n_known[in_risk] - 1
        self._cols = data.cluster[in_risk]
        self._in_risk = in_risk
        events = np.zeros((r, g))
        ev = data.status == 1
        np.add.at(events, (risk.event_slot[ev], data.cluster[ev]), 1.0)
        self.events_by_time = events
        self.d = risk.deaths.astype(float)
        self.d_cluster = data.events_per_cluster
        self.event_x = data.X[ev].sum(axis=0)

    def at_risk_weights(self, w: np.ndarray) -> np.ndarray:
        """``R[v, i] = sum_{j in i, y_ij >= tau_v} w_j`` as an ``(r, g)`` array."""
        M = np.zeros((self.risk.r, self.data.g))
        np.add.at(M, (self._rows, self._cols), w[self._in_risk])
        return np.cumsum(M[::-1], axis=0)[::-1]

    def baseline(self, beta, theta: float) -> np.ndarray:
        """Hazard jumps at the ordered distinct event times."""
        lin = self.data.X @ beta
        shift = float(lin.max())
        w = np.exp(lin - shift)
        R = self.at_risk_weights(w)
        k = 1.0 / theta
        g = self.data.g
        n_cum = np.zeros(g)
        h_cum = np.zeros(g)
        jumps = np.empty(self.risk.r)
        for v in range(self.risk.r):
            psi = (k + n_cum) / (k + h_cum)
            jump = self.d[v] / float(psi @ R[v])
            jumps[v] = jump
            h_cum += jump * R[v]
            n_cum += self.events_by_time[v]
        return jumps * math.exp(-shift)

    def loglik(self, beta, theta: float, jumps: np.ndarray, with_grad: bool = False):
        """Full log-likelihood with the baseline jumps held fixed.

        Gradient is with respect to ``(beta, log theta)``.
        """
        data = self.data
        H0 = cumhaz_at_subjects(self.risk, jumps)
        Hj = H0 * np.exp(data.X @ beta)
        s = np.bincount(data.cluster, weights=Hj, minlength=data.g)
        terms, dds, dlt = cluster_marginal_terms(theta, self.d_cluster, s)
        ll = float(self.d @ np.log(jumps) + self.event_x @ beta + terms.sum())
        if not with_grad:
            return ll
        g_b = self.event_x + (dds[data.cluster] * Hj) @ data.X
        return ll, np.concatenate((g_b, [float(dlt.sum())]))

    def plugin_loglik(self, beta, theta: float) -> float:
        return self.loglik(beta, theta, self.baseline(beta, theta))


def _plugin_hessian(pfl: PseudoFullLikelihood, x: np.ndarray, step: float = 1e-3) -> np.ndarray:
    """Central second differences of the plug-in log-likelihood in ``(beta, log theta)``."""
    p = x.shape[0] - 1

    def f(v):
        return pfl.plugin_loglik(v[:p], math.exp(v[p]))

    k = x.shape[0]
    f0 = f(x)
    H = np.empty((k, k))
    E = np.eye(k) * step
    fp = [f(x + E[i]) for i in range(k)]
    fm = [f(x - E[i]) for i in range(k)]
    for i in range(k):
        H[i, i] = (fp[i] - 2 * f0 + fm[i]) / step**2
        for j in range(i):
            fpp = f(x + E[i] + E[j])
            fmm = f(x - E[i] - E[j])
            fpm = f(x + E[i] - E[j])
            fmp = f(x - E[i] + E[j])
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4 * step**2)
    return H


def fit_pfl(data: ClusteredSurvivalData, cfg: FitConfig = FitConfig()) -> FrailtyFit:
    t0 = time.perf_counter()
    risk = build_risk_sets(data)
    pfl = PseudoFullLikelihood(data, risk)
    p = data.p
    lo, hi = cfg.log_theta_bounds

    cox = newton_partial_likelihood(data, risk, np.zeros(data.n), np.zeros(p), cfg)
    x = np.concatenate((cox.beta, [math.log(cfg.theta_init)]))
    jumps = pfl.baseline(x[:p], math.exp(x[p]))
    trace = [pfl.loglik(x[:p], math.exp(x[p]), jumps)]
    bounds = [(None, None)] * p + [(lo, hi)]

    tolerance_met = False
    it = 0
    for it in range(1, cfg.max_outer_iters + 1):
        fixed = jumps

        def objective(v):
            ll, gr = pfl.loglik(v[:p], math.exp(v[p]), fixed, with_grad=True)
            return -ll, -gr

        res = minimize(objective, x, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": 500, "ftol": 1e-15, "gtol": 1e-9})
        new_x = res.x
        theta_old, theta_new = math.exp(x[p]), math.exp(new_x[p])
        dparam = max(float(np.max(np.abs(new_x[:p] - x[:p]))), abs(theta_new - theta_old))
        x = new_x
        jumps = pfl.baseline(x[:p], theta_new)
        trace.append(pfl.loglik(x[:p], theta_new, jumps))
        if dparam < cfg.tol_param:
            tolerance_met = True
            break
        if np.max(np.abs(x[:p])) > cfg.divergence_guard:
            break

    beta, theta = x[:p].copy(), math.exp(x[p])
    H = _plugin_hessian(pfl, x)
    se_beta = se_theta = None
    diagnostics = []
    cov = inverse_information(-H)
    if cov is not None:
        se = np.sqrt(np.diag(cov))
        se_beta = se[:p]
        se_theta = theta * se[p]
    else:
        diagnostics.append("plug-in Hessian not negative definite; SEs omitted")

    s = np.bincount(data.cluster, weights=cumhaz_at_subjects(risk, jumps) * np.exp(data.X @ beta),
                    minlength=data.g)
    fit = FrailtyFit(
        method="pfl",
        beta=beta,
        theta=theta,
        se_beta=se_beta,
        se_theta=se_theta,
        baseline=StepCumulativeHazard(risk.event_times, jumps),
        loglik=trace[-1],
        loglik_trace=trace,
        n_iters=it,
        diagnostics=diagnostics,
        frailties=(1.0 / theta + pfl.d_cluster) / (1.0 / theta + s),
    )
    fit.wall_time = time.perf_counter() - t0
    return classify(fit, cfg, tolerance_met)
