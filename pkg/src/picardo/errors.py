"""Exception hierarchy shared by every picardo module."""

__all__ = [
    "PicardoError",
    "MismatchedDomain",
    "NonFinite",
    "OperatorFailure",
    "ArityMismatch",
    "OutOfRange",
    "Diverged",
    "InsufficientTrace",
    "HypothesisViolated",
    "SingularSystem",
    "CapExceeded",
    "ParseError",
    "ValidationError",
    "UnboundVariable",
    "EvalError",
]


class PicardoError(Exception):
    """Base class for all picardo errors."""


class MismatchedDomain(PicardoError):
    """Two points live on different grids or have different lengths."""


class NonFinite(PicardoError):
    """A point or an operator output contains a NaN or an infinity."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class OperatorFailure(PicardoError):
    """The user operator raised while being evaluated on a sample."""

    def __init__(self, message, sample=None):
        super().__init__(message)
        self.sample = sample


class ArityMismatch(PicardoError):
    """The tuples handed to a contraction evaluator do not fit its kind."""


class OutOfRange(PicardoError):
    """A Geraghty function left [0, 1) at some sample point."""

    def __init__(self, t, value):
        super().__init__(f"beta({t!r}) = {value!r} is outside [0, 1)")
        self.t = t
        self.value = value


class Diverged(PicardoError):
    """An iteration produced a non-finite or exploding step."""

    def __init__(self, message, iteration=None, step=None):
        super().__init__(message)
        self.iteration = iteration
        self.step = step


class InsufficientTrace(PicardoError):
    """Too few recorded steps to compute diagnostics."""


class HypothesisViolated(PicardoError):
    """A sampled existence-theorem hypothesis failed.

    ``checks`` holds the full hypothesis report so callers can still
    serialize it.
    """

    def __init__(self, condition, worst, checks=None):
        super().__init__(f"hypothesis {condition!r} violated (worst value {worst!r})")
        self.condition = condition
        self.worst = worst
        self.checks = checks or {}


class SingularSystem(PicardoError):
    def __init__(self, message, condition_estimate=None):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class CapExceeded(PicardoError):
    pass


class ParseError(PicardoError):
    """Malformed problem file or expression, with a 1-based location."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(loc + message)
        self.line = line
        self.column = column
        self.detail = message


class ValidationError(ParseError):
    """Well-formed input whose values break the declared schema."""


class UnboundVariable(PicardoError):
    def __init__(self, name):
        super().__init__(f"unbound variable {name!r}")
        self.name = name


class EvalError(PicardoError):
    """Arithmetic domain error during expression evaluation."""

    def __init__(self, message, span=None):
        if span is not None:
            message = f"{message} at columns {span[0] + 1}-{span[1]}"
        super().__init__(message)
        self.span = span
