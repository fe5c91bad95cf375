"""Exception hierarchy shared by every stage of the pipeline."""


class MotorDiagError(Exception):
    """Base class for all errors raised by motordiag."""


# audio ingestion
class MalformedHeader(MotorDiagError, ValueError):
    pass


class UnsupportedEncoding(MotorDiagError, ValueError):
    pass


class EmptyAudio(MotorDiagError, ValueError):
    pass


class WindowTooShort(MotorDiagError, ValueError):
    pass


class EmptyDataset(MotorDiagError, ValueError):
    pass


class AmbiguousLabel(MotorDiagError, ValueError):
    pass


# spectral
class EmptyInput(MotorDiagError, ValueError):
    pass


class EmptyBand(MotorDiagError, ValueError):
    pass


# networks
class DimensionMismatch(MotorDiagError, ValueError):
    pass


class LengthMismatch(MotorDiagError, ValueError):
    pass


class NonFiniteLoss(MotorDiagError, ArithmeticError):
    pass


# sampling
class NonFiniteLogJoint(MotorDiagError, ArithmeticError):
    pass


class DivergentTrajectory(MotorDiagError, ArithmeticError):
    pass


# evaluation / io
class DatasetTooSmall(MotorDiagError, ValueError):
    pass


class ModelFeatureMismatch(MotorDiagError, ValueError):
    pass


class IoFailure(MotorDiagError, OSError):
    pass
