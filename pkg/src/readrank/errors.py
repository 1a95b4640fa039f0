"""Exception types shared across the toolkit."""


class ReadrankError(Exception):
    """Base class for all readrank errors."""


class ValidationError(ReadrankError, ValueError):
    """Invalid input data, file format, configuration, or contract violation."""


class MetricUndefinedError(ValidationError):
    """A metric or statistical test has no defined value for the given input."""


class TrainingDivergedError(ReadrankError, RuntimeError):
    """Training produced a non-finite loss or non-finite parameters."""
