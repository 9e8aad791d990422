"""
Spectral Lab

Seeded spectral experiments on sparse random Hamiltonians: Pauli-string sums
compared with the GUE, resolvent filters, and simulated low-energy state
preparation.
"""

from .config import TOOL_VERSION as __version__
from .errors import ConfigError, DomainError, NumericError, ResourceError, SpectralLabError

__all__ = [
    "__version__",
    "ConfigError",
    "DomainError",
    "NumericError",
    "ResourceError",
    "SpectralLabError",
]
