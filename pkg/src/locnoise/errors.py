"""Exception hierarchy shared across the package."""


class LocNoiseError(Exception):
    """Base class for all package errors."""


class ValidationError(LocNoiseError, ValueError):
    """An input violates a documented invariant.

    ``field`` names the offending attribute when there is one.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class InsufficientDataError(LocNoiseError):
    pass


class NonConvergenceError(LocNoiseError):
    """A fit failed; ``diagnostics`` carries a JSON-friendly dict."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class SingularMatrixError(LocNoiseError):
    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class AnchorSearchError(LocNoiseError):
    pass


class AnchorFitError(LocNoiseError):
    """Fitting at one of the anchors failed; the test is aborted."""

    def __init__(self, message, anchor_index, anchor, diagnostics=None):
        super().__init__(message)
        self.anchor_index = anchor_index
        self.anchor = anchor
        self.diagnostics = dict(diagnostics or {})


class PooledVarianceError(LocNoiseError):
    def __init__(self, message, terms=None):
        super().__init__(message)
        self.terms = dict(terms or {})
