"""Exception hierarchy.

Each error class carries the CLI exit code for its failure class.
"""


class SplitWireError(Exception):
    exit_code = 1


class ParseError(SplitWireError):
    """Malformed input text. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(SplitWireError):
    pass


class UnsupportedFormatError(ParseError):
    pass


class SchemaError(ParseError):
    pass


class TruncationError(ParseError):
    pass


class ContractError(SplitWireError):
    pass


class ParameterError(SplitWireError):
    pass


class SizeError(SplitWireError):
    pass


class DegenerateGeometryError(SplitWireError):
    exit_code = 2


class InsufficientDataError(SplitWireError):
    exit_code = 3
