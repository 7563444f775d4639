"""Exception hierarchy. Each class carries the CLI exit code for its category."""


class SwingError(Exception):
    exit_code = 1


class NetworkFormatError(SwingError, ValueError):
    exit_code = 2


class NumericalError(SwingError, ArithmeticError):
    exit_code = 3


class SymmetryError(SwingError):
    exit_code = 4


class DivergenceError(SwingError, ArithmeticError):
    exit_code = 5
