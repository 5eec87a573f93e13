"""Bayesian quantile regression for panel data under GAL and AL errors."""

__version__ = "0.1.0"

from .exceptions import (
    CalibrationError,
    DegenerateRegionError,
    NumericalError,
    ValidationError,
)
from .gal import GalParams, gal_bounds, gal_cdf, gal_draw_mixture, gal_logpdf, gal_moments
from .model import (
    ChainOutput,
    ChainState,
    McmcConfig,
    PanelDataset,
    PanelUnit,
    PriorSpec,
    panel_from_csv,
    panel_to_csv,
    validate,
)
from .samplers import RngStream
from .freq_sampler import MhCalibration, calibrate_proposal, run_freq
from .req_sampler import run_req
from .marglik import MarglikReport, ThetaStar, loglik_at, marglik_freq, marglik_req
from .diagnostics import inefficiency_factor, summarize
from .simstudy import DgpSpec, generate, run_study

__all__ = [
    "__version__",
    "CalibrationError",
    "DegenerateRegionError",
    "NumericalError",
    "ValidationError",
    "GalParams",
    "gal_bounds",
    "gal_cdf",
    "gal_draw_mixture",
    "gal_logpdf",
    "gal_moments",
    "ChainOutput",
    "ChainState",
    "McmcConfig",
    "PanelDataset",
    "PanelUnit",
    "PriorSpec",
    "panel_from_csv",
    "panel_to_csv",
    "validate",
    "RngStream",
    "MhCalibration",
    "calibrate_proposal",
    "run_freq",
    "run_req",
    "MarglikReport",
    "ThetaStar",
    "loglik_at",
    "marglik_freq",
    "marglik_req",
    "inefficiency_factor",
    "summarize",
    "DgpSpec",
    "generate",
    "run_study",
]
