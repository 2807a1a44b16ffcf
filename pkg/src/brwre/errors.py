"""Exception types shared across the package."""


class BrwreError(Exception):
    """Base class for all package-specific errors."""


class PopulationCapExceeded(BrwreError):
    """A generation grew past the configured population cap."""


class NonGeometricGrowth(BrwreError):
    """A quenched series could not certify its tail within the term budget."""


class UnboundedProgenyInGeneralMode(BrwreError):
    """Pattern-sum evaluation requires offspring laws with bounded support."""


class SupportBelowRetention(BrwreError):
    """A test function's support dips below the retention floor of its inputs."""


class ArgumentOrder(BrwreError):
    """Arguments violate a required ordering (e.g. x < y)."""


class RejectionCapExceeded(BrwreError):
    """A rejection sampler exhausted its attempt budget."""


class ConfigError(BrwreError):
    """Invalid or inconsistent experiment configuration."""
