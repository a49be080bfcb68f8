"""Exception types shared across the package."""


class AlphaEmbedError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(AlphaEmbedError):
    """A token id falls outside the domain of a renaming."""


class SizeError(AlphaEmbedError):
    """A requested count exceeds what the target set can supply."""


class RangeError(AlphaEmbedError):
    """An integer argument is outside its valid range."""


class NormalizationError(AlphaEmbedError):
    """A zero-norm row or vector cannot be L2-normalized."""


class ModeError(AlphaEmbedError):
    """An operation is invalid for the embedding's current mode."""


class ConfigError(AlphaEmbedError):
    """Inconsistent or invalid configuration."""


class DataError(AlphaEmbedError):
    """A dataset is empty, missing, or otherwise unusable."""


class LengthError(AlphaEmbedError):
    """A sequence exceeds the model's configured maximum length."""


class MaskError(AlphaEmbedError):
    """Every position in a batch is masked out."""


class NumericError(AlphaEmbedError):
    """Training diverged to a non-finite loss."""


class DepthError(AlphaEmbedError):
    """An expression tree is deeper than the positional encoding supports."""


class ParseError(AlphaEmbedError):
    """Malformed formula, trace, or assignment string.

    ``line`` carries the 1-based line number when parsing a corpus file.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
