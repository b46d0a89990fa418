"""Exception hierarchy shared by all modules.

Each class carries the process exit code the command-line driver maps it to.
"""


class PmanifoldError(Exception):
    exit_code = 1


class InvalidInputError(PmanifoldError, ValueError):
    exit_code = 2


class DegenerateInputError(InvalidInputError):
    """Input is well-formed but carries no usable signal (all-zero spectrum, constant image)."""


class NumericalFailureError(PmanifoldError, ArithmeticError):
    exit_code = 3

    def __init__(self, message, residual=None, snapshot=None):
        super().__init__(message)
        self.residual = residual
        self.snapshot = snapshot


class TrainingFailureError(NumericalFailureError):
    def __init__(self, message, last_state=None):
        super().__init__(message, snapshot=last_state)
        self.last_state = last_state


class IntegrityError(PmanifoldError):
    exit_code = 4


class UnsupportedVersionError(IntegrityError):
    pass


class EmptyResultError(PmanifoldError):
    exit_code = 3
