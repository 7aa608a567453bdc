"""Mittag-Leffler Euler integrator for stochastic space-time fractional diffusion."""

__version__ = "0.1.0"

from .mittag_leffler import ml, ml_eval, ml_neg
from .model import (InitialDatum, ModelSpec, ModelValidationError, Nonlinearity, QSpectrum,
                    TimeGrid, validate)
from .noise import build_noise_model, restrict, sample_paths
from .solver import Control, mle_run, skeleton_run
from .lab import gamma_convergence_study, holder_study, strong_error_study
from .config import ConfigError, parse_config, parse_config_text

__all__ = [
    "__version__", "ml", "ml_eval", "ml_neg", "InitialDatum", "ModelSpec",
    "ModelValidationError", "Nonlinearity", "QSpectrum", "TimeGrid", "validate",
    "build_noise_model", "restrict", "sample_paths", "Control", "mle_run", "skeleton_run",
    "gamma_convergence_study", "holder_study", "strong_error_study", "ConfigError",
    "parse_config", "parse_config_text",
]
