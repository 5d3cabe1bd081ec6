"""Fitting algorithms for the shared gamma frailty model."""

from __future__ import annotations

from ..data import ClusteredSurvivalData
from .base import FitConfig, FrailtyFit, WeibullBaseline
from .cox import newton_partial_likelihood
from .em import fit_em
from .mml import fit_mml
from .pfl import fit_pfl
from .ppl import fit_ppl

METHODS = {"em": fit_em, "ppl": fit_ppl, "mml": fit_mml, "pfl": fit_pfl}
# the h-likelihood differs from the penalized partial likelihood by a constant
ALIASES = {"hl": "ppl"}


def resolve_method(name: str) -> str:
    key = name.lower()
    key = ALIASES.get(key, key)
    if key not in METHODS:
        choices = ", ".join(sorted([*METHODS, *ALIASES]))
        raise ValueError(f"unknown method {name!r} (choose from {choices})")
    return key


def fit(data: ClusteredSurvivalData, method: str = "em", cfg: FitConfig = FitConfig()) -> FrailtyFit:
    """Fit ``data`` with the named method (``em``, ``ppl``, ``mml``, ``pfl`` or ``hl``)."""
    return METHODS[resolve_method(method)](data, cfg)


__all__ = ["ALIASES", "METHODS", "FitConfig", "FrailtyFit", "WeibullBaseline", "fit", "fit_em",
           "fit_mml", "fit_pfl", "fit_ppl", "newton_partial_likelihood", "resolve_method"]
