"""Exception types shared across the package."""


class SdpcaError(Exception):
    """Base class for all package errors."""


class UnknownCode(SdpcaError):
    """Transformation code outside 1..7."""


class NonPositiveForLog(SdpcaError):
    """Log-based transform (codes 4-6) applied to a value <= 0."""


class MalformedHeader(SdpcaError):
    """CSV header does not follow the name-row / transform-row layout."""


class NonIntegerTcode(SdpcaError):
    """Transform row contains a non-integer entry."""


class EmptyPanel(SdpcaError):
    """No usable columns or rows remain."""


class ZeroVarianceColumn(SdpcaError):
    """Every column is degenerate; standardization impossible."""


class RankDeficient(SdpcaError):
    """Design matrix is rank deficient (collinear regressors)."""


class TooFewRows(SdpcaError):
    """Not enough observations for the requested fit."""


class KTooLarge(SdpcaError):
    """Requested factor count exceeds min(T, N)."""


class NonFiniteInput(SdpcaError):
    """Input contains NaN or infinite entries."""


class LengthMismatch(SdpcaError):
    """Paired vectors have different lengths."""


class InvalidConfig(SdpcaError):
    """Configuration violates its invariants."""
