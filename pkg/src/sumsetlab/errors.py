"""Exception types shared across the package."""


class SumsetLabError(Exception):
    """Base class for every error raised by sumsetlab."""


class OutOfWindow(SumsetLabError, ValueError):
    def __init__(self, coordinate):
        super().__init__(f"coordinate {coordinate!r} lies outside the window")
        self.coordinate = coordinate


class WindowMismatch(SumsetLabError, ValueError):
    pass


class RadiusTooLarge(SumsetLabError, ValueError):
    pass


class WrongConvention(SumsetLabError, ValueError):
    pass


class NotFound(SumsetLabError, LookupError):
    pass


class GrowthTooLarge(SumsetLabError, ValueError):
    pass


class HypothesisFailed(SumsetLabError):
    """A covering instance violates the lemma's hypotheses."""

    def __init__(self, reason, detail=None):
        msg = reason if detail is None else f"{reason}: {detail!r}"
        super().__init__(msg)
        self.reason = reason
        self.detail = detail


class NotCoverable(SumsetLabError, ValueError):
    pass


class ConfigInvalid(SumsetLabError, ValueError):
    pass


class UnknownFamily(SumsetLabError, LookupError):
    def __init__(self, name):
        super().__init__(f"unknown family {name!r}")
        self.name = name


class EvalError(SumsetLabError, ValueError):
    """A well-formed expression that cannot be evaluated."""


class EvalOverflow(EvalError):
    def __init__(self, expression, reason=""):
        super().__init__(f"{expression}: {reason}" if reason else str(expression))
        self.expression = expression


class DSLSyntaxError(SumsetLabError, ValueError):
    """Parse failure; ``line``/``column`` are 1-based line and 0-based offset in it."""

    def __init__(self, message, position, line, column, expected):
        super().__init__(f"{message} at line {line}, column {column}; expected {', '.join(expected)}")
        self.position = position
        self.line = line
        self.column = column
        self.expected = tuple(expected)
