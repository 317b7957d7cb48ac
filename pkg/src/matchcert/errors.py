"""Exception hierarchy shared across the toolkit.

Every error carries the CLI exit code it maps to, so the front end never has
to guess how to report a failure.
"""


class MatchCertError(Exception):
    exit_code = 1


class DomainError(MatchCertError, ValueError):
    """A point fell outside the unit square."""

    exit_code = 2


class ParameterError(MatchCertError, ValueError):
    exit_code = 2


class RangeError(MatchCertError, ValueError):
    """Sampled values left [0, 1]."""

    exit_code = 2


class ParseError(MatchCertError, ValueError):
    exit_code = 2


class ValidationError(MatchCertError):
    """A solution violates a model constraint by more than the allowed slack."""

    exit_code = 4

    def __init__(self, message, row=None, violation=None):
        super().__init__(message)
        self.row = row
        self.violation = violation


class SolverToleranceError(ValidationError):
    exit_code = 4


class BackendError(MatchCertError):
    exit_code = 4


class InfeasibleError(MatchCertError):
    exit_code = 4


class UnboundedError(MatchCertError):
    exit_code = 4


class ResourceError(MatchCertError):
    exit_code = 3

    def __init__(self, message, required_bytes=None):
        super().__init__(message)
        self.required_bytes = required_bytes
