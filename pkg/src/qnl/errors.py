"""Exception types shared across the package."""


class QnlError(Exception):
    """Base class for all package errors."""


class InvalidInputError(QnlError, ValueError):
    """An argument violates an operation's preconditions."""


class UnphysicalCoherenceError(QnlError, ValueError):
    """Coherence times violate t2 <= 2*t1."""


class FitFailureError(QnlError, RuntimeError):
    """A least-squares fit did not converge or was degenerate.

    Carries a ``diagnostics`` dict (raw data, initial guesses, solver
    message) so callers can report or persist the failure context.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UnachievableTargetError(QnlError, ValueError):
    """A requested target lies below the achievable floor of a model."""


class ConfigError(QnlError, ValueError):
    """A run configuration failed strict parsing or validation."""
