"""Exception types raised across psokit."""


class ConfigurationError(ValueError):
    """Invalid swarm, handler or problem configuration."""


class InitializationError(RuntimeError):
    """A feasible initial swarm could not be sampled."""


class InstanceError(ValueError):
    """A scheduling instance is malformed or cannot be scheduled."""
