class SFNError(Exception):
    """Base exception class for the SFN pipeline."""

    pass


class DatasetError(SFNError):
    """Raised for malformed question files, missing images and bad dataset layouts."""

    pass


class ConfigError(SFNError, ValueError):
    """Raised for invalid configuration values."""

    pass


class ModelError(SFNError):
    """Raised for shape, stage and width mismatches inside the network."""

    pass


class CheckpointError(SFNError):
    """Raised when a checkpoint cannot be written, read or matched to a model."""

    pass


class StageError(SFNError):
    """Raised when the transfer-learning protocol is run out of order."""

    pass


class SamplingError(SFNError):
    """Raised for invalid sample weights or empty splits."""

    pass


class MetricError(SFNError):
    """Raised when metric inputs violate their preconditions."""

    pass
