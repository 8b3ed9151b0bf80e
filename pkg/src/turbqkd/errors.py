"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid scenario or grid configuration."""


class NumericalIntegrityError(RuntimeError):
    """A numerical self-check failed (e.g. power drift across a screen stack)."""

    def __init__(self, message, shot=None):
        super().__init__(message if shot is None else f"shot {shot}: {message}")
        self.shot = shot


class UnderResolvedError(ValueError):
    """A feature is too small for the sampling grid to represent."""


class UnderResolvedWarning(UserWarning):
    """Turbulence or aperture close to the grid resolution limit."""


class UnphysicalStateError(ValueError):
    """Covariance matrix outside the physical (uncertainty-respecting) set."""


class DegenerateChannelError(ValueError):
    """The channel transmits nothing on average (T_f = 0)."""
