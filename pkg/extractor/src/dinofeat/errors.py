"""Exception hierarchy for the extractor.

The CLI maps these onto exit codes: ConfigError -> 2, everything
else -> 3.
"""


class DinofeatError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(DinofeatError):
    """Invalid configuration value (unknown layer, bad size, ...)."""


class WeightsError(DinofeatError):
    """Checkpoint file missing or incompatible with the builtin model."""


class InputError(DinofeatError):
    """Input images missing, unreadable, or colliding on output names."""
