"""Exception hierarchy.

Every error carries a stable ``exit_code`` used by the command-line front end.
"""


class SymctlError(Exception):
    exit_code = 1


class InvalidInputError(SymctlError, ValueError):
    exit_code = 2


class ParseError(InvalidInputError):
    """Syntax error in a configuration document or expression."""

    def __init__(self, message, offset=None, line=None, column=None, source=None):
        self.offset = offset
        self.line = line
        self.column = column
        self.source = source
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if offset is not None and line is None:
            where.append(f"offset {offset}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class DegenerateClassError(InvalidInputError):
    """Disturbance class with M = 0 or kappa_d = 0."""


class NumericDomainError(SymctlError, ArithmeticError):
    exit_code = 3


class BlowUpError(NumericDomainError):
    """Non-finite state reached during integration."""


class CapExceededError(SymctlError):
    exit_code = 6

    def __init__(self, message, estimate=None):
        self.estimate = estimate
        super().__init__(message)


class SynthesisFailure(SymctlError):
    exit_code = 4

    def __init__(self, message, mode=None):
        self.mode = mode
        super().__init__(message)


class RefinementError(SymctlError):
    exit_code = 5

    def __init__(self, message, step=None):
        self.step = step
        super().__init__(message)


class InvalidSignalError(InvalidInputError):
    """Disturbance signal leaves D or exceeds its Lipschitz bound."""
