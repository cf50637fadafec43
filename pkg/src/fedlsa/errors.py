"""Exception hierarchy shared by all fedlsa modules."""


class FedLsaError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(FedLsaError):
    """Inputs disagree on the problem dimension or agent count."""


class SingularSystem(FedLsaError):
    """A mean matrix is numerically singular (condition estimate above 1e12)."""


class UnstableMatrix(FedLsaError):
    """A matrix fails the stability check (some eigenvalue real part <= 0)."""


class SingularKronecker(FedLsaError):
    """The Kronecker system of a Lyapunov solve is numerically singular."""


class NotEnumerable(FedLsaError):
    """Exact expectations requested for a model without a finite outcome set."""


class InvalidRound(FedLsaError):
    """Round index outside the valid range (rounds are 1-indexed)."""


class InvalidRange(FedLsaError):
    """Empty or reversed round range."""


class OutOfRange(FedLsaError):
    """Scalar argument outside its admissible open interval."""


class EmptySamples(FedLsaError):
    """Quantile or interval requested from an empty sample set."""


class TooFewReplicates(FedLsaError):
    """Fewer than two finite bootstrap replicates survive."""


class InvalidCovariance(FedLsaError):
    """Plug-in covariance is asymmetric beyond tolerance."""


class EmptyInput(FedLsaError):
    """Coverage accounting over an empty result list."""


class NoConvergence(FedLsaError):
    """Power iteration failed to reach the target residual."""


class HurwitzFailure(FedLsaError):
    """Feature resampling exhausted without producing a stable mean matrix."""


class StabilityFailure(FedLsaError):
    """Synthetic system generation exhausted retries without stable agents."""


class NonPositiveValue(FedLsaError):
    """Log-log rate fit requires strictly positive values."""
