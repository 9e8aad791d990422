"""
Errors

This module provides the exception types raised across the laboratory. The CLI
maps them onto exit codes (config-type errors exit 2, numeric failures exit 3).
"""

from typing import Any, Dict, Optional


class SpectralLabError(Exception):
    """Base class for every error raised by spectral_lab."""


class DomainError(SpectralLabError, ValueError):
    """Input outside an operation's domain (width mismatch, non-Hermitian matrix, bad range)."""


class ResourceError(SpectralLabError, MemoryError):
    """Requested object does not fit the configured dense memory budget."""


class ConfigError(SpectralLabError, ValueError):
    """Experiment configuration is invalid or incomplete."""


class NumericError(SpectralLabError, ArithmeticError):
    """
    A numerical routine did not converge.

    Attributes:
        best_estimate: Best value reached before giving up (None if nothing usable)
        diagnostics: Solver-specific details (iterations, residuals, error estimates)
    """

    def __init__(self, message: str, best_estimate: Optional[float] = None,
                 diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.diagnostics = diagnostics or {}
