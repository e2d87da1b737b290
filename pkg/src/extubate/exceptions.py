"""Exception hierarchy. CLI exit codes hang off these classes."""


class ExtubateError(Exception):
    exit_code = 1


class ConfigError(ExtubateError, ValueError):
    exit_code = 2


class DataError(ExtubateError, ValueError):
    exit_code = 3


class MissingArtifactError(DataError, FileNotFoundError):
    exit_code = 3


class HashMismatchError(DataError):
    exit_code = 4


class SchemaError(DataError):
    exit_code = 5


class NumericError(ExtubateError, ArithmeticError):
    exit_code = 6


class ShapeError(ExtubateError, ValueError):
    """Array shapes disagree with a layer or model definition."""

    exit_code = 5
