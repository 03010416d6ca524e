"""Exception types raised across the package."""


class UwposeError(Exception):
    """Base class for all package errors."""


class ZeroNormQuaternion(UwposeError, ValueError):
    """Quaternion norm too small to normalize (degenerate network output)."""


class DomainError(UwposeError, ValueError):
    pass


class AlreadyGrayscale(UwposeError, ValueError):
    pass


class EmptyScene(UwposeError, ValueError):
    pass


class EmptyDataset(UwposeError, ValueError):
    pass


class OutOfRange(UwposeError, ValueError):
    """Requested time lies outside the dataset; no extrapolation is done."""


class DegenerateAxis(UwposeError, ValueError):
    pass


class DegenerateGeometry(UwposeError, ValueError):
    pass


class ShapeMismatch(UwposeError, ValueError):
    pass


class DivergedTraining(UwposeError, RuntimeError):
    pass


class NoDropoutLayers(UwposeError, ValueError):
    pass


class NonPositiveDt(UwposeError, ValueError):
    pass


class MaxGapExceeded(UwposeError, ValueError):
    """Gap between measurements too large for the constant-velocity model."""


class SingularInnovationCovariance(UwposeError, ArithmeticError):
    pass


class OutOfOrderMeasurement(UwposeError, ValueError):
    pass


class LengthMismatch(UwposeError, ValueError):
    pass


class ConfigError(UwposeError, ValueError):
    pass
