class ConfigError(Exception):
    """Invalid configuration or precondition violation at setup time."""


class SimAbort(Exception):
    """A run aborted mid-flight (handler failure, malformed trace, ...)."""
