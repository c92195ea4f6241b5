"""Exception types raised across the package."""


class DualstatError(Exception):
    """Base class for all errors raised by dualstat."""


class DimensionMismatchError(DualstatError):
    """Operand shapes are incompatible."""


class RankDeficientError(DualstatError):
    """A matrix required to have full column rank does not."""


class NotPositiveDefiniteError(DualstatError):
    """A noise covariance failed its Cholesky factorization."""


class DegenerateVarianceError(DualstatError):
    """Contrast variance fell below the numerical floor."""


class InvalidDfError(DualstatError):
    """Degrees of freedom must be a positive integer."""


class ZeroVectorError(DualstatError):
    """A parameter vector required to be nonzero is zero."""


class DegenerateDenominatorError(DualstatError):
    """Per-class sums make the normalization denominator zero."""


class NotBinaryError(DualstatError):
    """A two-class operation received a design with M != 2."""


class NotIndicatorError(DualstatError):
    """An operation requires a one-hot indicator design matrix."""


class OneClassError(DualstatError):
    """Training labels contain a single class."""


class NotScalarError(DualstatError):
    """An operation requires a one-dimensional (P=1) model."""


class InvalidAlphaError(DualstatError):
    """Significance level must lie strictly inside (0, 1)."""


class InvalidNError(DualstatError):
    """Sample count is out of its valid domain."""


class InvalidProbabilityError(DualstatError):
    """A probability parameter is outside [0, 1]."""


class InvalidKError(DualstatError):
    """Fold count must satisfy 2 <= K <= N."""


class EstimatorFailureError(DualstatError):
    """An estimator failed inside a resampling loop.

    The message carries the permutation or fold index at which the
    underlying error occurred; the original exception is chained.
    """


class EmptyRegionError(DualstatError):
    """A calibration region contains no voxels."""


class DimsMismatchError(DualstatError):
    """Volumes in a group do not share identical dimensions."""


class LabelCountMismatchError(DualstatError):
    """Number of labels does not match the number of volumes."""
