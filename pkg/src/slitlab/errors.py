"""Exception hierarchy shared by all slitlab modules."""


class SlitlabError(Exception):
    """Base class for every error raised by slitlab."""


class DomainError(SlitlabError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConvergenceError(SlitlabError, ArithmeticError):
    """A numerical routine did not reach its tolerance within budget."""


class CapacityError(SlitlabError):
    """A request exceeds a configured resource bound."""


class DataError(SlitlabError):
    """Measured or simulated data violate an analysis precondition."""


class EmptySignalError(DataError):
    """No signal remains after baseline subtraction."""


class FormatError(SlitlabError):
    """A frame file is malformed.

    ``offset`` is the byte offset (binary files) or line number (CSV files)
    at which parsing failed.
    """

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class ConfigError(SlitlabError):
    """A run configuration failed validation."""

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.key = key
        self.line = line
