"""Finite-size key rates for four-intensity MDI-QKD with a two-dimensional decoy scan."""

from .baseline import baseline_key_rate, worst_case_bounds
from .channel import ChannelObservables, model_observables, sample_tallies
from .core import (
    ChannelParams,
    DomainError,
    ExpectedRateInterval,
    IntensityProfile,
    PairTally,
    TallySet,
    binary_entropy,
    poisson_pmf,
)
from .decoy import DecoyBounds, ScanRectangle, build_scan_rectangle, decoy_bounds_at
from .lp import LPInfeasible
from .optimize import OptimizationResult, OptimizerOptions, optimize_profile
from .pipeline import Evaluation, evaluate, evaluate_baseline
from .scan import KeyRateResult, scan_minimum
from .stats import SecurityBudget, chernoff_interval

__version__ = "0.1.0"

__all__ = [
    "ChannelObservables",
    "ChannelParams",
    "DecoyBounds",
    "DomainError",
    "Evaluation",
    "ExpectedRateInterval",
    "IntensityProfile",
    "KeyRateResult",
    "LPInfeasible",
    "OptimizationResult",
    "OptimizerOptions",
    "PairTally",
    "ScanRectangle",
    "SecurityBudget",
    "TallySet",
    "baseline_key_rate",
    "binary_entropy",
    "build_scan_rectangle",
    "chernoff_interval",
    "decoy_bounds_at",
    "evaluate",
    "evaluate_baseline",
    "model_observables",
    "optimize_profile",
    "poisson_pmf",
    "sample_tallies",
    "scan_minimum",
    "worst_case_bounds",
]
