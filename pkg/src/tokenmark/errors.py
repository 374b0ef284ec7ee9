"""Exception types shared across the package.

Exit-code mapping used by the CLI: ConfigError family -> 2, data/source
errors -> 3, EmptyScoreError -> 4.
"""


class TokenmarkError(Exception):
    """Base class for all package errors."""


class ConfigError(TokenmarkError):
    """Invalid parameter combination or malformed configuration."""


class WindowUnderflow(TokenmarkError):
    """Seeding context shorter than the scheme's window width h."""


class SourceError(TokenmarkError):
    """A next-token source violated the LmSource contract."""


class EmptyScoreError(TokenmarkError):
    """Detector was given a sequence with zero scorable tokens."""


class DataError(TokenmarkError):
    """Missing or malformed input data (corpus, JSONL, snapshots)."""


class RangeError(TokenmarkError):
    """Requested target value lies outside the attainable range."""


class SizeError(TokenmarkError):
    """Exact enumeration requested on a vocabulary too large to enumerate."""


class BudgetError(TokenmarkError):
    """Attack budget incompatible with the sequence (e.g. over-deletion)."""


class EncodingError(TokenmarkError):
    """Input bytes are not valid UTF-8."""
