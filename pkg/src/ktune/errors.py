"""Exception hierarchy shared by every ktune module."""

from __future__ import annotations


class KtuneError(Exception):
    """Base class for all errors raised by ktune."""


# --- search space -----------------------------------------------------------


class DuplicateParameter(KtuneError):
    pass


class EmptyValueList(KtuneError):
    pass


class InvalidParameter(KtuneError):
    pass


class ConstraintSyntaxError(KtuneError):
    """Malformed constraint text.

    ``position`` is the 0-based character offset of the offending token and
    ``expected`` lists what the parser would have accepted there.
    """

    def __init__(self, text: str, position: int, expected: list[str]):
        self.text = text
        self.position = position
        self.expected = list(expected)
        super().__init__(
            f"syntax error at offset {position} in {text!r}: expected {' or '.join(expected)}"
        )


class UnknownParameter(KtuneError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown parameter {name!r}")


class DivisionByZero(KtuneError, ZeroDivisionError):
    def __init__(self, subexpression: str):
        self.subexpression = subexpression
        super().__init__(f"division by zero in {subexpression!r}")


class InvalidConfiguration(KtuneError):
    pass


class BudgetExceedsSpace(KtuneError):
    def __init__(self, requested: int, available: int):
        self.requested = requested
        self.available = available
        super().__init__(f"budget {requested} exceeds {available} valid configurations")


class ExplicitEnumerationTooLarge(KtuneError):
    def __init__(self, raw_size: int, limit: int):
        self.raw_size = raw_size
        self.limit = limit
        super().__init__(
            f"raw search space of {raw_size} configurations exceeds the enumeration limit {limit}"
        )


# --- search -----------------------------------------------------------------


class EmptySpace(KtuneError):
    pass


class NonPositiveTemperature(KtuneError):
    pass


class InvalidProbabilities(KtuneError):
    pass


class InvalidStrategy(KtuneError):
    pass


# --- tuner ------------------------------------------------------------------


class InexactDivision(KtuneError):
    def __init__(self, dimension: int, numerator: int, divisor: int):
        self.dimension = dimension
        self.numerator = numerator
        self.divisor = divisor
        super().__init__(f"dimension {dimension}: {numerator} is not divisible by {divisor}")


class ZeroDivisor(KtuneError):
    pass


class EmptySpaceAfterConstraints(KtuneError):
    pass


class BackendUnavailable(KtuneError):
    pass


class ShapeMismatch(KtuneError):
    pass


# --- backends ---------------------------------------------------------------


class UnknownParameterSet(KtuneError):
    pass


class MalformedReplayFile(KtuneError):
    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class SpawnFailure(KtuneError):
    pass


class ProtocolViolation(KtuneError):
    def __init__(self, message: str, stderr: str = ""):
        self.stderr = stderr
        super().__init__(message if not stderr else f"{message}\n--- stderr ---\n{stderr}")


# --- landscapes -------------------------------------------------------------


class NonPositiveTime(KtuneError):
    pass


class UnknownDevice(KtuneError):
    pass
