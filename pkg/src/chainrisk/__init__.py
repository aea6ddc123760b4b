"""Explicit excess-risk bounds for empirical risk minimization, with simulation checks."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ChainRiskError,
    ConfigurationError,
    ConvergenceError,
    DegenerateMomentError,
    DomainError,
    ExperimentError,
    GammaBudgetError,
    RankDeficiencyError,
    UnsupportedOracleError,
)

__all__ = [
    "ChainRiskError", "ConfigurationError", "ConvergenceError", "DegenerateMomentError",
    "DomainError", "ExperimentError", "GammaBudgetError", "RankDeficiencyError",
    "UnsupportedOracleError", "__version__",
]
