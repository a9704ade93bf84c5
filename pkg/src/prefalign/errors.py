"""Exception types shared across the package."""


class PrefalignError(Exception):
    """Base class for package errors."""


class ConfigurationError(PrefalignError):
    """A configuration value or combination is invalid."""


class InputError(PrefalignError, ValueError):
    """An operation received arguments violating its preconditions."""


class TrainingError(PrefalignError):
    """A training step produced a non-finite or otherwise unusable update."""


class UndefinedResultError(PrefalignError):
    """The requested statistic is undefined for the given data."""


class FormatError(PrefalignError):
    """A token sequence violates the response grammar.

    Carries the offending token position (or the sequence length when the
    sequence ended early) and a short reason.
    """

    def __init__(self, position: int, reason: str):
        self.position = position
        self.reason = reason
        super().__init__(f"position {position}: {reason}")
