"""Exception hierarchy shared across the package.

The CLI maps these onto its exit codes, so every error a command can
surface derives from :class:`SeeSawError`.
"""

from __future__ import annotations


class SeeSawError(Exception):
    """Base class for all package errors."""


class ConfigError(SeeSawError):
    pass


# -- tree --------------------------------------------------------------------

class MalformedTree(SeeSawError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidOverride(SeeSawError):
    pass


class EmptyPlan(SeeSawError):
    pass


# -- workspace ---------------------------------------------------------------

class UnknownPath(SeeSawError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its arg otherwise
        return str(self.args[0]) if self.args else ""


class PathSetMismatch(SeeSawError):
    pass


# -- backend -----------------------------------------------------------------

class BackendError(SeeSawError):
    """A completion could not be obtained.

    ``session`` and ``report`` are filled in by the engine as the error
    propagates so callers can inspect partial state.
    """

    session = None
    report = None


class NoScriptMatch(BackendError):
    pass


class CapExceeded(BackendError):
    pass


class ScriptParseError(SeeSawError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# -- metrics -----------------------------------------------------------------

class DuplicateSeq(SeeSawError):
    pass


class EmptyLedger(SeeSawError):
    pass
