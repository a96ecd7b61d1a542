"""Exception hierarchy shared by all spectral_lab modules."""

from __future__ import annotations


class SpectralLabError(Exception):
    """Base class for all library errors."""


class InvalidDimensionError(SpectralLabError):
    """Spatial dimension outside the supported set {1, 2, 3}."""


class SizeOverflowError(SpectralLabError):
    """Requested grid or dense matrix exceeds the desk-scale budget."""


class WrongSpaceError(SpectralLabError):
    """A position-space operation received a frequency-space function (or vice versa)."""


class MisalignedScaleError(SpectralLabError):
    """Randomization scale h is not an integer multiple of the grid spacing."""


class BoxTooSmallError(SpectralLabError):
    """The requested structure does not fit inside the periodic box."""


class PointOutsideBoxError(SpectralLabError):
    """A sample point lies outside the fundamental domain of the box."""


class SingularSymbolError(SpectralLabError):
    """Resolvent symbol requested at a real energy with no regularization."""


class BranchAmbiguityError(SpectralLabError):
    """Square-root symbol winds around the origin along a lattice path."""


class IncompatibleStageError(SpectralLabError):
    """Adjacent operator stages act on incompatible spaces."""


class NoConvergenceError(SpectralLabError):
    """An iterative estimator failed to reach its tolerance.

    Carries the best estimate so callers can decide whether to proceed.
    """

    def __init__(self, message: str, best_value: float | None = None):
        super().__init__(message)
        self.best_value = best_value


class OverflowSignalError(SpectralLabError):
    """Norm growth exceeded floating-point range (spectral radius >> 1)."""


class ParameterOverflowError(SpectralLabError):
    """A derived parameter (e.g. cluster radius) exceeds the box; reported, never clipped."""


class RegionTouchesSpectrumWarning(UserWarning):
    """Scan region intersects the essential spectrum [0, inf)."""


class EndpointExponentError(SpectralLabError):
    """Exponent q sits at an endpoint excluded by the bound being evaluated."""


class ConfigError(SpectralLabError):
    """Experiment configuration failed schema validation."""


class SchemaMismatchError(SpectralLabError):
    """A CSV/JSON artifact does not match its documented schema."""
