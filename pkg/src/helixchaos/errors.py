"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: `UsageError` -> 1, every other
`HelixChaosError` -> 2, `OSError` -> 3.
"""


class HelixChaosError(Exception):
    """Base class for all package errors."""


class UsageError(HelixChaosError):
    """Bad arguments, unknown names, malformed configuration."""


class ExprSyntaxError(UsageError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    def __init__(self, name, offset):
        super().__init__(f"unknown identifier {name!r}", offset)
        self.name = name


class MissingParameterError(UsageError):
    pass


class EvaluationError(HelixChaosError):
    """Numeric failure while evaluating an expression or iterating a map."""


class DomainError(EvaluationError):
    pass


class NonFiniteError(EvaluationError):
    pass


class DescendingStepError(EvaluationError):
    """F(x) <= x was encountered; the map is not ascending for these parameters."""


class SeriesTooShortError(HelixChaosError):
    pass


class NotInRegimeError(HelixChaosError):
    pass


class InsufficientDataError(HelixChaosError):
    pass


class BracketError(HelixChaosError):
    pass


class UnreachableTargetError(HelixChaosError):
    pass


class NonMonotoneError(HelixChaosError):
    pass


class IngestError(HelixChaosError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
