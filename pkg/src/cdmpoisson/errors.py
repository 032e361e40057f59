"""Exception hierarchy shared by the library and the CLI."""


class CdmError(Exception):
    """Base class for every error raised by :mod:`cdmpoisson`."""


class DomainError(CdmError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class EstimationError(CdmError, ValueError):
    """A rate or hyperparameter cannot be estimated from the given data."""


class SchemaError(CdmError, ValueError):
    """Input file does not carry the expected columns."""
