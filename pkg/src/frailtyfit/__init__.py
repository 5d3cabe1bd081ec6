"""Shared gamma frailty models for clustered right-censored survival data."""

from .baseline import StepCumulativeHazard, breslow, evaluate
from .data import ClusteredSurvivalData, DataError, build_risk_sets, load_csv, write_csv
from .estimators import FitConfig, FrailtyFit, WeibullBaseline, fit
from .simulate import SimulationScenario, calibrate_censoring, generate

__version__ = "0.1.0"

__all__ = [
    "ClusteredSurvivalData",
    "DataError",
    "FitConfig",
    "FrailtyFit",
    "SimulationScenario",
    "StepCumulativeHazard",
    "WeibullBaseline",
    "breslow",
    "build_risk_sets",
    "calibrate_censoring",
    "evaluate",
    "fit",
    "generate",
    "load_csv",
    "write_csv",
]
