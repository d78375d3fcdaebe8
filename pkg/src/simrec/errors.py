"""Exception hierarchy shared by all modules."""


class SimrecError(Exception):
    """Base class for every error raised by this package."""


class ParseError(SimrecError, ValueError):
    """A line in an input file could not be parsed."""

    def __init__(self, message, lineno=None, path=None):
        super().__init__(message)
        self.message = message
        self.lineno = lineno
        self.path = path

    def __str__(self):
        where = ""
        if self.path is not None:
            where += f"{self.path}:"
        if self.lineno is not None:
            where += f"{self.lineno}:"
        return f"{where} {self.message}" if where else self.message


class FieldCountError(ParseError):
    pass


class TimestampError(ParseError):
    pass


class KindError(ParseError):
    pass


class DimensionMismatchError(ParseError):
    pass


class ZeroNormError(ParseError):
    pass


class FormatVersionError(ParseError):
    """Model file header is missing or names an unsupported version."""


class AbsentItemError(SimrecError, KeyError):
    """An item has no vector/row in the model being queried."""

    def __str__(self):
        return Exception.__str__(self)


class UndefinedRatioError(SimrecError, ZeroDivisionError):
    """A hit ratio was requested over zero eligible cases."""


class ConfigError(SimrecError, ValueError):
    """Invalid or unknown configuration key/value."""
