"""Exception types raised across the package."""


class WindclimeError(Exception):
    """Base class for all package errors."""


class ParseError(WindclimeError, ValueError):
    """A malformed input line; ``line`` is 1-based."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class OrderingError(WindclimeError, ValueError):
    """Timestamps go backwards within one station stream."""


class ConfigError(WindclimeError, ValueError):
    """Invalid configuration or roughness table."""


class TooShortError(WindclimeError, ValueError):
    """Series has no admissible split point."""


class DegenerateSampleError(WindclimeError, ValueError):
    """Sample cannot support the requested fit (too few or constant values)."""


class ConvergenceError(WindclimeError, RuntimeError):
    """Iterative solver did not converge. Carries a diagnostics dict."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        if self.diagnostics:
            extra = ", ".join(f"{k}={v!r}" for k, v in self.diagnostics.items())
            message = f"{message} ({extra})"
        super().__init__(message)


class ReturnPeriodError(WindclimeError, ValueError):
    """Return period shorter than the mean interval between events."""


class ArtifactError(WindclimeError, ValueError):
    """Model artifact is corrupt, tampered with, or from a newer format."""
