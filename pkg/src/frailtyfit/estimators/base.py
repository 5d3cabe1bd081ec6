"""Configuration and result types shared by all estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ..baseline import StepCumulativeHazard


@dataclass(frozen=True)
class FitConfig:
    max_outer_iters: int = 200
    max_inner_iters: int = 50
    tol_loglik: float = 1e-8  # relative
    tol_param: float = 1e-6  # absolute, on beta and theta
    theta_init: float = 1.0
    theta_bounds: tuple[float, float] = (1e-6, 100.0)
    divergence_guard: float = 20.0
    # a theta estimate within this distance of a bound (log scale) is a boundary solution
    boundary_margin: float = 1e-2

    def __post_init__(self):
        if min(self.tol_loglik, self.tol_param) <= 0:
            raise ValueError("tolerances must be > 0")
        lo, hi = self.theta_bounds
        if not 0 < lo < hi:
            raise ValueError("theta_bounds must satisfy 0 < lower < upper")
        if not lo < self.theta_init < hi:
            raise ValueError("theta_init must lie inside theta_bounds")
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            raise ValueError("iteration limits must be >= 1")

    @property
    def log_theta_bounds(self) -> tuple[float, float]:
        return math.log(self.theta_bounds[0]), math.log(self.theta_bounds[1])


@dataclass(frozen=True)
class WeibullBaseline:
    """``h0(t) = lambda * alpha * t^(alpha - 1)``, ``H0(t) = lambda * t^alpha``."""

    alpha: float
    lam: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.lam > 0):
            raise ValueError("alpha and lambda must be > 0")

    def __call__(self, t):
        return self.lam * np.asarray(t, dtype=float) ** self.alpha

    def hazard(self, t):
        t = np.asarray(t, dtype=float)
        return self.lam * self.alpha * t ** (self.alpha - 1.0)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "lambda": self.lam}


@dataclass
class FrailtyFit:
    method: str
    beta: np.ndarray
    theta: float
    se_beta: Optional[np.ndarray]
    se_theta: Optional[float]
    baseline: Union[StepCumulativeHazard, WeibullBaseline, None]
    loglik: float
    loglik_trace: list = field(default_factory=list)
    converged: bool = False
    n_iters: int = 0
    wall_time: float = 0.0
    diagnostics: list = field(default_factory=list)
    # Weibull shape/scale SEs for the parametric fit
    se_baseline: Optional[dict] = None
    # predicted cluster frailties (posterior means or exp(u))
    frailties: Optional[np.ndarray] = None
    extras: dict = field(default_factory=dict)

    def params(self) -> dict:
        """Point estimates keyed ``beta1..betap, theta, alpha, lambda``."""
        out = {f"beta{k + 1}": float(b) for k, b in enumerate(self.beta)}
        out["theta"] = float(self.theta)
        if isinstance(self.baseline, WeibullBaseline):
            out["alpha"] = self.baseline.alpha
            out["lambda"] = self.baseline.lam
        return out

    def standard_errors(self) -> dict:
        out = {}
        for k in range(len(self.beta)):
            se = None if self.se_beta is None else self.se_beta[k]
            out[f"beta{k + 1}"] = None if se is None or not np.isfinite(se) else float(se)
        out["theta"] = self.se_theta
        if self.se_baseline:
            out.update(self.se_baseline)
        return out

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "estimates": self.params(),
            "standard_errors": self.standard_errors(),
            "loglik": self.loglik,
            "converged": self.converged,
            "n_iters": self.n_iters,
            "wall_time": self.wall_time,
            "diagnostics": list(self.diagnostics),
            "baseline": None if self.baseline is None else self.baseline.to_dict(),
        }


def at_boundary(theta: float, cfg: FitConfig) -> bool:
    lo, hi = cfg.log_theta_bounds
    lt = math.log(theta)
    return lt - lo < cfg.boundary_margin or hi - lt < cfg.boundary_margin


def classify(fit: FrailtyFit, cfg: FitConfig, tolerance_met: bool) -> FrailtyFit:
    """Set ``fit.converged``: tolerances met, theta interior, beta not diverged."""
    ok = tolerance_met
    if not tolerance_met:
        fit.diagnostics.append("tolerance not met")
    if at_boundary(fit.theta, cfg):
        ok = False
        fit.diagnostics.append(f"boundary solution: theta={fit.theta:.3g}")
    if not np.all(np.isfinite(fit.beta)) or np.max(np.abs(fit.beta)) >= cfg.divergence_guard:
        ok = False
        fit.diagnostics.append("beta diverged")
    if fit.se_beta is None or not np.all(np.isfinite(fit.se_beta)):
        ok = False
        fit.diagnostics.append("beta standard errors unavailable")
    fit.converged = bool(ok)
    return fit


# pivots below this fraction of the largest diagonal entry count as rank deficiency
_RCOND = 1e-10


def _cholesky(info: np.ndarray) -> Optional[np.ndarray]:
    try:
        L = np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        return None
    if np.min(np.diag(L)) ** 2 < _RCOND * np.max(np.diag(info)):
        return None
    return L


def newton_direction(info: np.ndarray, grad: np.ndarray) -> tuple[np.ndarray, bool]:
    """Solve ``info @ step = grad``.

    Returns ``(step, regular)``. When ``info`` is not safely positive definite
    the step is taken in the span of its clearly positive eigen-directions
    and ``regular`` is False.
    """
    L = _cholesky(info)
    if L is not None:
        return np.linalg.solve(L.T, np.linalg.solve(L, grad)), True
    w, V = np.linalg.eigh(0.5 * (info + info.T))
    keep = w > _RCOND * max(float(np.max(np.abs(w))), 1e-300)
    step = V[:, keep] @ ((V[:, keep].T @ grad) / w[keep])
    return step, False


def inverse_information(info: np.ndarray) -> Optional[np.ndarray]:
    """Covariance matrix ``info^-1``; ``None`` unless safely positive definite."""
    L = _cholesky(info)
    if L is None:
        return None
    Linv = np.linalg.inv(L)
    return Linv.T @ Linv


def sqrt_diag_inverse(info: np.ndarray) -> Optional[np.ndarray]:
    """Standard errors from an information matrix; ``None`` unless safely positive definite."""
    L = _cholesky(info)
    if L is None:
        return None
    Linv = np.linalg.inv(L)
    return np.sqrt(np.sum(Linv * Linv, axis=0))
