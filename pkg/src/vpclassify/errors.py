"""Exception types shared across the package."""


class VpcError(ValueError):
    """Base class for domain errors raised by this package."""


class IncompatibleGridsError(VpcError):
    """Two objects that must share a grid do not."""


class DegenerateCurveError(VpcError):
    """A curve has zero norm where a positive norm is required."""


class InsufficientSampleError(VpcError):
    """Not enough curves for the requested lag or block length."""


class NotSymmetricError(VpcError):
    """Kernel asymmetry exceeds the tolerance of a symmetric solver."""


class NoDiscrepancyError(VpcError):
    """A difference-operator spectrum is numerically zero; the lag carries no information."""


class DegenerateLagError(VpcError):
    """Both groups have a vanishing covariance amplitude at a lag; its weight is undefined."""


class UntrainableModelError(VpcError):
    """Every candidate lag was degenerate; no classifier can be assembled."""
