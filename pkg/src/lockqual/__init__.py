"""Two-perspective service quality evaluation for waterway locks.

Demand side: survey screening, reliability and adequacy checks,
exploratory factoring, covariance-structure estimation, satisfaction
scoring with holdout validation, and entropy/delay profiling.
Supplier side: AHP weighting of expert judgments. The two weightings
meet in a bias comparison, and an ordered probit prunes the
questionnaire to its informative core.
"""
from __future__ import annotations

from . import ahp, catalog, dataset, efa, oprobit, psychometrics, scoring, sem, synth
from . import pipeline
from .catalog import DEFAULT_CATALOG, VariableCatalog
from .dataset import SurveyDataset, describe, load_survey, split, write_survey
from .efa import extract_pca, prune, rotate_varimax
from .pipeline import GateThresholds, PipelineConfig, run_pipeline
from .psychometrics import adequacy, bartlett, cronbach_alpha, kmo
from .sem import (
    MeasurementModel,
    construct_validity,
    fit_indices,
    fit_ml,
    implied_sigma,
    standardize,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ahp",
    "catalog",
    "dataset",
    "efa",
    "oprobit",
    "pipeline",
    "psychometrics",
    "scoring",
    "sem",
    "synth",
    "GateThresholds",
    "PipelineConfig",
    "run_pipeline",
    "DEFAULT_CATALOG",
    "VariableCatalog",
    "SurveyDataset",
    "load_survey",
    "write_survey",
    "describe",
    "split",
    "cronbach_alpha",
    "kmo",
    "bartlett",
    "adequacy",
    "extract_pca",
    "rotate_varimax",
    "prune",
    "MeasurementModel",
    "implied_sigma",
    "fit_ml",
    "standardize",
    "fit_indices",
    "construct_validity",
]
