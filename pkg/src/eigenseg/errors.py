"""Exception hierarchy shared by all eigenseg modules.

The CLI maps these onto exit codes: ConfigError -> 2, data/IO errors -> 3,
NumericalError -> 4.
"""


class EigensegError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(EigensegError):
    """Invalid configuration value (bad M/N/k, missing context, ...)."""


class FormatError(EigensegError):
    """File content does not match the expected on-disk format."""


class UnsupportedLayout(FormatError):
    """Valid file, but a layout this package deliberately does not read."""


class InvalidValue(EigensegError):
    """Non-finite or otherwise out-of-domain numeric content."""


class IoError(EigensegError):
    """Underlying I/O failure while reading or writing."""


class DimensionError(EigensegError):
    """Mismatched or incompatible array dimensions."""


class DegenerateGraph(EigensegError):
    """Too few nodes to build a meaningful affinity graph."""


class InsufficientInstances(EigensegError):
    """An operation needs at least two labelled instances."""


class InsufficientForeground(EigensegError):
    """Fewer foreground pixels than requested clusters."""


class NoInstances(EigensegError):
    """Ground truth contains no instance labels."""


class DegenerateStatistic(EigensegError):
    """A variance ratio or similar statistic is undefined (0/0)."""


class NumericalError(EigensegError):
    """An iterative numeric routine failed to converge."""


class SpecError(EigensegError):
    """Invalid synthetic scene specification."""
