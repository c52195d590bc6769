"""Exception types shared across the package."""


class SpikevarError(Exception):
    """Base class for all artifact-specific failures."""


class InvalidInputError(SpikevarError, ValueError):
    """An argument violates a documented precondition."""


class NonExcitatoryError(SpikevarError, ValueError):
    """A single-input neuron with non-positive weight can never fire."""


class SingularSystemError(SpikevarError, ValueError):
    """A firing-condition matrix has no inverse."""


class UndefinedMetricError(SpikevarError, ValueError):
    """A summary metric is undefined for the given curve."""


class UndefinedStatisticError(SpikevarError, ValueError):
    """A test statistic is undefined for degenerate samples."""


class NetworkFormatError(SpikevarError, ValueError):
    """A network file failed parsing or validation."""


class ConfigError(SpikevarError, ValueError):
    """An experiment configuration is missing or malformed."""
