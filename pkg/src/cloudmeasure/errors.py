"""Exception hierarchy shared across the package."""


class CloudMeasureError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(CloudMeasureError):
    """Operands live in incompatible ambient or intrinsic dimensions."""


class EmptyRegionError(CloudMeasureError):
    """A ball or point set that must carry mass/points is empty."""


class DegenerateFrameError(CloudMeasureError):
    """A supplied frame is rank deficient and cannot be orthonormalized."""


class ResolutionExhaustedError(CloudMeasureError):
    """Too few samples remain at the requested scale for a reliable estimate."""


class InfeasibleScheduleError(CloudMeasureError):
    """Exponent-schedule parameters violate a feasibility constraint."""


class DataFormatError(CloudMeasureError):
    """An input file is malformed or internally inconsistent."""
