"""Exception hierarchy.

Data problems (bad files, schema mismatches) and parameter problems are kept
apart so the command line can map them to distinct exit codes.
"""


class RLBlockError(Exception):
    """Base class for every error raised by this package."""


class DataError(RLBlockError):
    """Input data could not be used."""


class SchemaError(DataError):
    pass


class IntegrityError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ParameterError(RLBlockError, ValueError):
    """A method parameter is out of range or inconsistent."""


class SpecError(ParameterError):
    """A corruption spec cannot be satisfied."""
