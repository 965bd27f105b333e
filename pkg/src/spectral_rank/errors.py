"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class SpectralRankError(Exception):
    """Base class for all errors raised by :mod:`spectral_rank`."""


class ParseError(SpectralRankError, ValueError):
    """Malformed input text; carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(SpectralRankError, ValueError):
    """Well-formed input that violates a data contract."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParameterError(SpectralRankError, ValueError):
    """An argument is outside its admissible range."""


class UnsupportedConfigurationError(ParameterError):
    pass


class FitError(SpectralRankError, RuntimeError):
    """The data cannot be fitted (e.g. the comparison graph is not rankable)."""


class NumericError(SpectralRankError, ArithmeticError):
    """A numerical routine failed (non-convergence, zero mass, ...)."""


class GenerationError(SpectralRankError, RuntimeError):
    """A synthetic data generator could not honour its configuration."""
