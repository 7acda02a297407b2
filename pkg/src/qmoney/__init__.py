"""Simulation and security analysis of practical unforgeable quantum money."""

from .detection import NoiseModel, Source, analytic_c, estimate_correctness_mc
from .quantum import Basis, PairSecret
from .security import SecurityMode, amplified_params, delta, security_threshold

__version__ = "0.1.0"

__all__ = [
    "Basis",
    "NoiseModel",
    "PairSecret",
    "SecurityMode",
    "Source",
    "amplified_params",
    "analytic_c",
    "delta",
    "estimate_correctness_mc",
    "security_threshold",
]
