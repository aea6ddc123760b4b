"""Exception types raised across the package."""


class ChainRiskError(Exception):
    """Base class for package errors."""


class ConfigurationError(ChainRiskError, ValueError):
    """Invalid problem, experiment or bound configuration."""


class DomainError(ChainRiskError, ValueError):
    """Argument outside the domain where a formula is defined."""


class DegenerateMomentError(ChainRiskError, ValueError):
    pass


class UnsupportedOracleError(ChainRiskError, NotImplementedError):
    """No closed form available; use a Monte-Carlo estimate instead."""


class RankDeficiencyError(ChainRiskError, ArithmeticError):
    pass


class ConvergenceError(ChainRiskError, RuntimeError):
    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class GammaBudgetError(ChainRiskError, ValueError):
    """Confidence budget allocated beyond the total failure probability."""


class ExperimentError(ChainRiskError, RuntimeError):
    """Too many failed trials, or results that cannot be summarized."""
