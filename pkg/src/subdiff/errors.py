"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid mesh/grid/schedule/solver configuration supplied by the caller."""


class NumericsError(RuntimeError):
    """A numerical procedure diverged or failed to reach its required tolerance."""
