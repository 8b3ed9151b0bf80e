"""Split-step simulation of turbulent optical channels and CV-QKD key rates."""

from .errors import (
    ConfigurationError,
    DegenerateChannelError,
    NumericalIntegrityError,
    UnderResolvedError,
    UnderResolvedWarning,
    UnphysicalStateError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DegenerateChannelError",
    "NumericalIntegrityError",
    "UnderResolvedError",
    "UnderResolvedWarning",
    "UnphysicalStateError",
]
