"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2,
DimensionCapError -> 3, InvariantError -> 4.
"""


class MqcsimError(Exception):
    """Base class for package errors."""


class ConfigError(MqcsimError):
    """Malformed or incomplete configuration."""


class DimensionCapError(MqcsimError):
    """Requested system exceeds the configured Hilbert-space cap."""


class InvariantError(MqcsimError):
    """An internal consistency check failed (numerical invariant violated)."""


class AliasingError(MqcsimError):
    """Phase grid too coarse to resolve all coherence orders."""
