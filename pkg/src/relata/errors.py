"""Exception hierarchy shared by every relata module."""


class RelataError(Exception):
    """Base class for all errors raised by relata."""


class DimensionError(RelataError, ValueError):
    """Operand shapes or widths do not agree."""


class NumericError(RelataError, ArithmeticError):
    """A NaN or infinite value reached a numeric operation."""


class ArgumentError(RelataError, ValueError):
    """An argument is outside its permitted range."""


class DegenerateBatchError(RelataError, ValueError):
    """Batch statistics are undefined for the given batch."""


class DegenerateMatrixError(RelataError, ValueError):
    """A matrix carries no mass (e.g. all entries zero)."""


class FormatError(RelataError, ValueError):
    """A file or record does not follow its declared format."""


class EmptyFeatureError(RelataError, ValueError):
    """Feature selection produced nothing to select from."""


class OOVError(RelataError, KeyError):
    """A word is not in the vocabulary."""

    def __init__(self, word):
        super().__init__(word)
        self.word = word

    def __str__(self):
        return f"out-of-vocabulary word: {self.word!r}"


class TrainingDataError(RelataError, ValueError):
    """No usable training data remains after filtering."""


class EvaluationError(RelataError, ValueError):
    """An evaluation metric cannot be computed from its inputs."""


class UndefinedCorrelationError(EvaluationError):
    """Rank correlation is undefined (too few items or constant ranks)."""
