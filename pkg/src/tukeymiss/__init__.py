"""Tukey's representation for nonignorable missing data.

The observed-data model and an odds-of-missingness mechanism jointly
determine the missing-data model in closed form when both are built from
Gaussian exponential-family pieces.
"""

from .core import (
    AsymptoteLogit,
    CanonicalMechanism,
    LinearLogit,
    QuadraticLogit,
    TukeyModel,
    canonicalize,
    complete_model,
    complete_moments,
    missing_model,
    q_closed_form,
    solve_intercept,
    validate,
)
from .dataset import Dataset, TruthRecord
from .expfam import GaussianNatural, MixtureModel
from .inference import McmcConfig, PriorConfig, fit, impute, posterior_estimands
from .simulate import SimConfig, TukeyProcess, simulate

__version__ = "0.1.0"

__all__ = [
    "AsymptoteLogit", "CanonicalMechanism", "Dataset", "GaussianNatural", "LinearLogit",
    "McmcConfig", "MixtureModel", "PriorConfig", "QuadraticLogit", "SimConfig",
    "TruthRecord", "TukeyModel", "TukeyProcess", "canonicalize", "complete_model",
    "complete_moments", "fit", "impute", "missing_model", "posterior_estimands",
    "q_closed_form", "simulate", "solve_intercept", "validate",
]
