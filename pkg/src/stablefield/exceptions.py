"""Exception types raised across the package."""


class StableFieldError(Exception):
    """Base class for all errors raised by stablefield."""


class DegenerateSample(StableFieldError, ValueError):
    """A sample carries no tail information (e.g. all magnitudes equal)."""


class InvalidMomentOrder(StableFieldError, ValueError):
    """Requested absolute moment order is outside (0, alpha)."""


class UnsupportedSkew(StableFieldError, ValueError):
    """Skewed law is not supported for the requested quantity."""


class InvalidAlpha(StableFieldError, ValueError):
    """Stability index outside the range an operation is defined on."""


class ZeroScale(StableFieldError, ValueError):
    """A stable integral has zero scale so its skewness is undefined."""


class DimensionMismatch(StableFieldError, ValueError):
    pass


class EmptyComposite(StableFieldError, ValueError):
    pass


class NotIsotropic(StableFieldError, ValueError):
    pass


class NotPSD(StableFieldError, ValueError):
    """Gram matrix could not be factorized even after jitter escalation."""


class GridTooLarge(StableFieldError, ValueError):
    pass


class SingularSystem(StableFieldError, ValueError):
    """Linear prediction system is singular or too ill-conditioned.

    A Gram matrix with zero determinant means the observed random vector
    is singular: some nontrivial linear combination of the observations
    vanishes almost surely.
    """


class SingularProblem(SingularSystem):
    """Kernel vectors at the observation sites are linearly dependent."""


class NonConvergence(StableFieldError, RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ZeroCovariationVector(StableFieldError, ValueError):
    """All covariations between observations and target vanish."""


class ConfigError(StableFieldError, ValueError):
    pass
