"""
errors.py – exception hierarchy of the splitting lab

Provides:
- SplittingError: base class, carries an optional ``details`` dict
- SpecError, ConfigError: bad Hamiltonian data / unreadable configuration
- HypothesisError: a hypothesis an operation depends on fails
- ConvergenceError: Newton, quadrature, series or fixed-point iteration failed
- PrecisionError: working precision too low for the request
- FitError: ill-conditioned or under-determined fits
"""


class SplittingError(Exception):
    """Base class; ``details`` ends up in the structured CLI error."""

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = dict(details or {})

    def to_dict(self) -> dict:
        return {
            "error": type(self).__name__,
            "message": str(self),
            "details": {k: str(v) for k, v in self.details.items()},
        }


class SpecError(SplittingError, ValueError):
    pass


class ConfigError(SplittingError, ValueError):
    pass


class HypothesisError(SplittingError):
    pass


class ConvergenceError(SplittingError, RuntimeError):
    pass


class PrecisionError(SplittingError):
    pass


class FitError(SplittingError):
    pass
