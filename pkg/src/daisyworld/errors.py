"""Exception types shared across the package."""


class DaisyworldError(Exception):
    """Base class for all package errors."""


class SimplexError(DaisyworldError, ValueError):
    """State outside the physical simplex (cover fractions)."""


class NonphysicalClimateError(DaisyworldError, ValueError):
    """Negative radicand in a local temperature: q too large for this L."""


class StiffnessError(DaisyworldError, RuntimeError):
    """Adaptive step size underflowed; the problem looks stiff."""


class UnresolvedError(DaisyworldError, RuntimeError):
    """A convergence run ended without reaching a known attractor."""


class BracketError(DaisyworldError, ValueError):
    """A root- or threshold-finding bracket is invalid."""


class ConfigurationError(DaisyworldError, ValueError):
    """Invalid run configuration (CLI / config file)."""
