"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration values."""
