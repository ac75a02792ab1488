"""Exception hierarchy.

Everything derives from :class:`UnijunctionError` so callers (and the CLI)
can separate domain failures from programming errors.
"""


class UnijunctionError(Exception):
    """Base class for all domain errors raised by this package."""


class SingularInputError(UnijunctionError, ValueError):
    """Evaluation too close to the pole of a characteristic."""


class NonFiniteStateError(UnijunctionError, ValueError):
    pass


class BlowUpError(UnijunctionError, ArithmeticError):
    """Integrated state left the configured norm bound."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class IntegrationError(UnijunctionError, RuntimeError):
    """Step-size underflow or step budget exhausted."""


class NoPositiveRootError(UnijunctionError, ValueError):
    pass


class NonConvergenceError(UnijunctionError, RuntimeError):
    pass


class DegenerateTangentError(UnijunctionError, ArithmeticError):
    pass


class RankDeficientError(UnijunctionError, ValueError):
    pass


class TooFewSamplesError(UnijunctionError, ValueError):
    pass


class ZeroVarianceError(UnijunctionError, ValueError):
    pass


class ParseError(UnijunctionError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
