"""Exception hierarchy shared by all modules.

The CLI maps :class:`ValidationError` to exit code 2 and
:class:`NumericalError` (and other runtime failures) to exit code 3.
"""


class HeadlineSentimentError(Exception):
    """Base class for all package errors."""


class ValidationError(HeadlineSentimentError, ValueError):
    """Bad configuration or input data."""


class MalformedLexiconError(ValidationError):
    """A lexicon or embedding file does not follow its declared format."""

    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class ShapeError(HeadlineSentimentError, ValueError):
    """Tensor shapes are incompatible with an operation."""


class NumericalError(HeadlineSentimentError, ArithmeticError):
    """A NaN or Inf was produced, or a loss diverged.

    ``diagnostics`` carries whatever context the raiser had (op name,
    tensor shapes, epoch/batch indices).
    """

    def __init__(self, message, **diagnostics):
        self.diagnostics = diagnostics
        if diagnostics:
            detail = ", ".join(f"{k}={v}" for k, v in diagnostics.items())
            message = f"{message} ({detail})"
        super().__init__(message)


class LexiconWarning(UserWarning):
    """Non-fatal irregularity in a lexicon file (e.g. duplicate token)."""
