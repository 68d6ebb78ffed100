"""Exception types shared across the engine."""


class M3iError(Exception):
    """Base class for every error raised by this package."""


class TypeMismatch(M3iError):
    """Operator applied to a value kind it does not accept."""


class NonFiniteValue(M3iError):
    """NaN or infinity offered where only finite numbers are admitted."""


class DuplicateFactor(M3iError):
    """Factor id registered twice."""


class UnknownFactor(M3iError):
    """Factor id not present in the registry or snapshot."""


class KindMismatch(M3iError):
    """Ingested value kind differs from the factor's declared kind."""


class DuplicateCallback(M3iError):
    """Callback id registered twice."""


class UnknownCallback(M3iError):
    """Method trigger fired for a callback id nobody registered."""


class DuplicateRule(M3iError):
    """Rule id already present in the engine."""


class UnknownRule(M3iError):
    """Rule id not present in the engine."""


class InvalidRule(M3iError):
    """Rule rejected at load time (bad factor, kind mismatch, bad action)."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class OutOfOrder(M3iError):
    """Trace event timestamps went backwards."""


class ModeMismatch(M3iError):
    """Event supplied for a factor whose mode does not accept events."""


class ParseError(M3iError):
    """Rule text rejected by the parser; carries positioned diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


class MaxDepthExceeded(M3iError):
    """Nested-rule tree deeper than the configured maximum."""


class AlreadyRunning(M3iError):
    """start() called on an engine that is already ticking."""


class NotRunning(M3iError):
    """stop() called on an engine that is not ticking."""
