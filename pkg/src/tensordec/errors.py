"""Exception types shared across the package.

The CLI maps these onto exit codes: format problems exit 2, degeneracies
exit 3, violated preconditions exit 4.
"""


class TensordecError(Exception):
    """Base class for errors raised by this package."""


class FormatError(TensordecError, ValueError):
    """Raised when a serialized tensor or decomposition cannot be parsed."""


class PreconditionError(TensordecError, ValueError):
    """Raised when an operation's stated precondition does not hold."""


class DegeneracyError(TensordecError, RuntimeError):
    """Raised when an algorithm hits a degenerate instance it cannot solve.

    Carries a ``diagnostics`` dict (retry counts, separations achieved,
    residuals) so callers can report what went wrong.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
