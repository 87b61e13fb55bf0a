"""Exception types shared across the package."""


class FunfolioError(Exception):
    """Base class for all funfolio errors."""


class ValidationError(FunfolioError):
    """Invalid input data or configuration."""


class NonFiniteError(ValidationError):
    """A matrix contains NaN or infinite entries."""


class DuplicateAssetError(ValidationError):
    """Asset labels are not unique."""


class TooShortError(ValidationError):
    """Panel has fewer than two rows."""


class DimensionMismatchError(FunfolioError):
    """Inputs disagree on the number of assets."""


class DegenerateVarianceError(FunfolioError):
    """V - U^2 fell below the variance guard for a Sharpe or Msd objective."""


class NonStationaryError(ValidationError):
    """GARCH coefficients violate covariance stationarity."""


class MissingModelError(FunfolioError):
    """Parametric resampling requested without a fitted AR(1) model."""


class BadBlockLenError(ValidationError):
    """Block length outside [1, n]."""


class InfeasibleOmegaError(ValidationError):
    """Constraint set with p * lower_bound > 1 admits no weight vector."""


class SingularCovarianceError(FunfolioError):
    """Covariance matrix is not invertible."""


class DegenerateDError(FunfolioError):
    """Closed-form frontier denominator D = BC - A^2 vanished (mu proportional to 1)."""


class ZeroVarianceError(FunfolioError):
    """Paired differences are all identical."""


class ConstantSeriesError(FunfolioError):
    """Autocorrelations are undefined for a constant series."""


class InsufficientHistoryError(FunfolioError):
    """Not enough complete history in the requested window."""


class MissingBenchmarkError(FunfolioError):
    """Benchmark column absent from the price table."""
