"""Spectral Galerkin simulation of dissipative stochastic evolution
equations, with coupling-based verification of semigroup estimates."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DimensionMismatch,
    DissipSdeError,
    DivergentTail,
    InfeasibleQ,
    InvalidSigma,
    IterationLimit,
    NonFiniteState,
    NotLinearModel,
    SingularSigma,
)

__all__ = [
    "ConfigError",
    "DimensionMismatch",
    "DissipSdeError",
    "DivergentTail",
    "InfeasibleQ",
    "InvalidSigma",
    "IterationLimit",
    "NonFiniteState",
    "NotLinearModel",
    "SingularSigma",
    "__version__",
]
