"""Heterogeneous step-stress Weibull lifetime modeling under Type-II
censoring: distribution family, EM estimation, simulation, post-fit
inference, and Monte Carlo study tooling."""

from .em import EmConfig, EmFit, fit_em, fit_homogeneous
from .estimators import HomogeneousStepStressEstimator, StepStressMixtureEstimator
from .inference import BootstrapConfig, GofMethod, bootstrap_ci, ks_gof, quantile_from_fit
from .model import cdf, distribution_at, loglik_eq8, loglik_mixture, population_cdf, quantile
from .sampling import SimRequest, generate_sample, stream_for
from .types import CdfFamily, CensoredSample, MixtureParams

__version__ = "0.1.0"

__all__ = [
    "CdfFamily",
    "CensoredSample",
    "MixtureParams",
    "distribution_at",
    "population_cdf",
    "cdf",
    "quantile",
    "loglik_mixture",
    "loglik_eq8",
    "SimRequest",
    "generate_sample",
    "stream_for",
    "EmConfig",
    "EmFit",
    "fit_em",
    "fit_homogeneous",
    "BootstrapConfig",
    "GofMethod",
    "bootstrap_ci",
    "ks_gof",
    "quantile_from_fit",
    "StepStressMixtureEstimator",
    "HomogeneousStepStressEstimator",
]
