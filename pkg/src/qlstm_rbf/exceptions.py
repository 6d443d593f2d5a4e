"""Exception hierarchy. Each family maps to one CLI exit code."""


class QlstmRbfError(Exception):
    exit_code = 1


class DataError(QlstmRbfError, ValueError):
    """Malformed, missing or out-of-range input data."""

    exit_code = 1


class ConfigError(QlstmRbfError, ValueError):
    """Invalid configuration or shape mismatch between components."""

    exit_code = 2


class NumericalError(QlstmRbfError, ArithmeticError):
    exit_code = 3


class TrainingDivergedError(NumericalError):
    """Training produced a non-finite loss."""


class DegenerateGeometryError(NumericalError):
    """All latent points coincide, so the kernel bandwidth is zero."""


class InvalidReturnError(DataError):
    """A simple return at or below -100%."""
