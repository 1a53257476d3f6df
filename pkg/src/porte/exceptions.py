"""Exception hierarchy shared across the toolkit.

Argument-level problems subclass :class:`ValueError` so callers that only
care about "bad input" can catch the builtin.
"""


class PorteError(Exception):
    """Base class for all toolkit errors."""


class AudioFormatError(PorteError, ValueError):
    """Malformed RIFF/WAVE header or unreadable audio payload."""


class UnsupportedFormatError(PorteError, ValueError):
    """Audio codec or sample format the reader does not handle."""


class EmptySignalError(PorteError, ValueError):
    """Raised when an operation would leave no audio (e.g. fully silent input)."""


class TooShortError(PorteError, ValueError):
    pass


class UnmeasurableLoudnessError(PorteError, ValueError):
    """Every 400 ms block fell below the gates."""


class CorpusError(PorteError):
    pass


class RejectedSourceError(PorteError):
    """Source utterance fails the post-trim duration filter."""


class UnpromptableMixtureError(PorteError):
    """No prompt template can unambiguously identify the target."""


class ManifestParseError(PorteError, ValueError):
    def __init__(self, message, line_number=None, field=None):
        self.line_number = line_number
        self.field = field
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class UndefinedMetricError(PorteError, ValueError):
    """Metric has no defined value for the given inputs (e.g. SuRE with no active frames)."""


class GradientUndefinedError(PorteError, ValueError):
    pass


class EvaluationError(PorteError, ArithmeticError):
    """Function evaluated to a non-finite value during gradient checking."""
