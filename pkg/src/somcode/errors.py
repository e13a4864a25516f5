"""Exception hierarchy.

``SomValidationError`` covers bad inputs (shape/label/config problems the
caller can fix); the CLI maps it to exit code 2. Everything else derived
from ``SomError`` is a runtime failure (exit code 1).
"""


class SomError(Exception):
    """Base class for all errors raised by this package."""


class SomValidationError(SomError):
    """Invalid input: wrong shapes, labels, sizes or configuration."""


# -- linalg ------------------------------------------------------------

class NonFiniteError(SomValidationError):
    """Input contains NaN or Inf."""


class NonSymmetricError(SomValidationError):
    """Matrix asymmetry exceeds tolerance."""


class IndefiniteMatrixError(SomError):
    """A significantly negative eigenvalue was found where PSD was required."""


class SingularSystemError(SomError):
    """Linear solve could not reach the residual tolerance."""


class RankOutOfRangeError(SomValidationError):
    """Requested rank outside [1, min(rows, cols)]."""


# -- ordinal structures ------------------------------------------------

class CapacityExceededError(SomValidationError):
    """More class codes requested than the bit length can hold."""


class SizeNotPowerOfTwoError(SomValidationError):
    """Hadamard construction needs a power-of-two bit length."""


class DegenerateMeansError(SomError):
    """Class means are all identical; quantization has nothing to split."""


class TooFewBitsError(SomValidationError):
    """Spectral code table needs at least one bit per class."""


class LabelOutOfRangeError(SomValidationError):
    """A sample label does not index a row of the class code table."""


class NoPairsError(SomValidationError):
    """Separation score needs at least one intra- and one inter-class pair."""


# -- filters / trainer / encoder ---------------------------------------

class DimensionMismatchError(SomValidationError):
    """Operands do not conform."""


class ShapeMismatchError(DimensionMismatchError):
    """Matrices expected to share a shape do not."""


class LengthMismatchError(DimensionMismatchError):
    """Vectors expected to share a length do not."""


class EmptyClassError(SomValidationError):
    """Training requires at least one sample per class."""


class EmptyProbeError(SomValidationError):
    """Probe encoding has no frames."""


class EmptyGalleryError(SomValidationError):
    """Model gallery has no codes to vote against."""


# -- harness ------------------------------------------------------------

class InvalidSpecError(SomValidationError):
    """Synthetic data spec violates its invariants."""


class ParseError(SomValidationError):
    """A data file could not be parsed.

    ``line`` is the 1-based number of the offending line (0 when the
    problem is not tied to a specific line).
    """

    def __init__(self, message, line=0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class VersionMismatchError(SomValidationError):
    """File header does not match a supported format version."""
