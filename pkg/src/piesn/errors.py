"""Exception types raised across the package."""


class PiesnError(Exception):
    """Base class for all package errors."""


class DimensionError(PiesnError, ValueError):
    """Array shapes do not line up."""


class InvalidStateError(PiesnError, ValueError):
    """A state vector contains non-finite or mis-sized components."""


class DivergenceError(PiesnError, FloatingPointError):
    """A computation produced non-finite values.

    Attributes:
        step: index of the step at which the blow-up was detected.
    """

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class InsufficientLengthError(PiesnError, ValueError):
    pass


class SingularSystemError(PiesnError, ArithmeticError):
    pass


class DegenerateMatrixError(PiesnError, ArithmeticError):
    pass


class NumericError(PiesnError, ArithmeticError):
    pass


class FormatError(PiesnError, ValueError):
    """A persisted file could not be parsed.

    Attributes:
        line: 1-based line number of the first offending line, if known.
    """

    def __init__(self, message: str, line: int | None = None, path=None):
        where = ""
        if path is not None:
            where += f"{path}: "
        if line is not None:
            where += f"line {line}: "
        super().__init__(where + message)
        self.line = line
        self.path = path
