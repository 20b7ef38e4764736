"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class QNoiseError(Exception):
    """Base class for all package errors."""


class InvalidArgument(QNoiseError, ValueError):
    pass


class CapacityError(QNoiseError, ValueError):
    """An input exceeds a fixed size bound (simulator width, grid shape)."""


class ParseError(QNoiseError, ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class UnsupportedGateError(ParseError):
    def __init__(self, gate: str, line: int | None = None, column: int | None = None):
        self.gate = gate
        super().__init__(f"unsupported gate '{gate}'", line, column)


class InvalidState(QNoiseError, RuntimeError):
    """Operation called on an object that is not ready for it (e.g. unfitted model)."""


class NumericError(QNoiseError, ArithmeticError):
    """Non-finite values encountered during training or simulation."""
