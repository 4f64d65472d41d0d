"""Exception types shared across the package.

Everything raised on purpose derives from SocdiffError so callers (service,
CLI) can map domain failures to exit code 1 / HTTP 400 without catching
bare Exception.
"""


class SocdiffError(Exception):
    """Base class for all domain errors."""


class EdgeError(SocdiffError, ValueError):
    """An input edge references an index outside the declared range."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class NetworkMismatchError(SocdiffError, ValueError):
    """Two structures that must share an index space do not."""


class NoProfileError(SocdiffError):
    """Target user has an empty training profile; use coldstart_scores."""


class UnreachableUserError(SocdiffError):
    """Target has neither collected items nor friends; only the popularity
    baseline can serve such a user."""


class NotEvaluableError(SocdiffError):
    """A metric cannot be computed for this user (e.g. empty probe set)."""


class OracleSizeError(SocdiffError):
    """Dense transfer-matrix oracle refused: item count exceeds the cap."""


class ParseError(SocdiffError, ValueError):
    """Malformed dataset file; carries path and 1-based line number."""

    def __init__(self, message, path=None, line_no=None):
        super().__init__(message)
        self.path = path
        self.line_no = line_no


class SplitMismatchError(SocdiffError, ValueError):
    """Persisted split does not belong to the given network."""
