"""Error taxonomy shared by every module.

Each class carries a short category tag that the CLI prints in front of the
message, so failures are grep-able by kind.
"""


class VsembedError(Exception):
    """Base class for all errors raised by this package."""

    category = "error"


class ShapeError(VsembedError):
    """Tensor dimensions disagree with an operation's contract."""

    category = "shape"


class DegenerateVectorError(VsembedError):
    """A vector with (near-)zero norm where a direction is required."""

    category = "degenerate"


class ContractError(VsembedError):
    """A precondition violated by the caller (non-scalar loss, empty batch, ...)."""

    category = "contract"


class VocabularyError(VsembedError):
    """A token index outside the embedding table."""

    category = "vocabulary"


class FormatError(VsembedError):
    """A malformed file: bad magic, truncation, inconsistent header."""

    category = "format"


class ConfigError(VsembedError):
    """An invalid or unknown configuration key / value."""

    category = "config"


class NumericError(VsembedError):
    """Non-finite values encountered where the computation must abort."""

    category = "numeric"
