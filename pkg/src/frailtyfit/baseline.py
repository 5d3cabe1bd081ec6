"""Breslow estimator of the cumulative baseline hazard."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ClusteredSurvivalData, RiskSetIndex


@dataclass(frozen=True, eq=False)
class StepCumulativeHazard:
    """Right-continuous step function ``H0(t) = sum_{knot <= t} increment``."""

    knots: np.ndarray
    increments: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        inc = np.asarray(self.increments, dtype=float)
        if knots.shape != inc.shape:
            raise ValueError("knots and increments must have the same length")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if np.any(inc <= 0):
            raise ValueError("increments must be > 0")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "increments", inc)
        object.__setattr__(self, "_cum", np.cumsum(inc))

    @property
    def cumulative(self) -> np.ndarray:
        return self._cum

    def __call__(self, t):
        return evaluate(self, t)

    def to_dict(self) -> dict:
        return {"knots": self.knots.tolist(), "increments": self.increments.tolist()}


def evaluate(H: StepCumulativeHazard, t):
    """Evaluate ``H0(t)``; zero before the first knot."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    idx = np.searchsorted(H.knots, t, side="right")
    out = np.where(idx > 0, H.cumulative[np.maximum(idx - 1, 0)], 0.0)
    return out if out.ndim else float(out)


def risk_sums(risk: RiskSetIndex, weights: np.ndarray) -> np.ndarray:
    """``sum_{j in R(y_(v))} w_j`` for every distinct event time (reverse sweep)."""
    rev = np.cumsum(weights[risk.order][::-1])[::-1]
    return rev[risk.start]


def breslow_increments(risk: RiskSetIndex, linear_predictor: np.ndarray) -> np.ndarray:
    """Hazard jumps ``d_(v) / sum_{R(y_(v))} exp(eta)``.

    ``linear_predictor`` holds ``beta'x_ij + u_i`` per subject.
    """
    shift = float(np.max(linear_predictor))
    s0 = risk_sums(risk, np.exp(linear_predictor - shift))
    if np.any(s0 <= 0):
        raise RuntimeError("empty risk set")
    return risk.deaths / s0 * np.exp(-shift)


def breslow(data: ClusteredSurvivalData, risk: RiskSetIndex, beta, log_frailty) -> StepCumulativeHazard:
    """Breslow cumulative baseline hazard at fixed ``beta`` and log-frailties."""
    beta = np.asarray(beta, dtype=float)
    log_frailty = np.asarray(log_frailty, dtype=float)
    if beta.shape != (data.p,):
        raise ValueError(f"beta must have length {data.p}")
    if log_frailty.shape != (data.g,):
        raise ValueError(f"log_frailty must have length {data.g}")
    eta = data.X @ beta + log_frailty[data.cluster]
    return StepCumulativeHazard(risk.event_times, breslow_increments(risk, eta))


def cumhaz_at_subjects(risk: RiskSetIndex, increments: np.ndarray) -> np.ndarray:
    """``H0(y_ij)`` for every subject, including the subject's own jump."""
    cum = np.concatenate(([0.0], np.cumsum(increments)))
    return cum[risk.n_known]
