from typing import Optional


class PoseKitError(ValueError):
    """Base class of every domain error. The CLI maps `exit_code` to the process status."""

    exit_code = 2


class InvalidQuaternionError(PoseKitError):
    pass


class InvalidRotationError(PoseKitError):
    pass


class DegenerateAxisError(PoseKitError):
    pass


class IllConditionedLogError(PoseKitError):
    pass


class EmptyInputError(PoseKitError):
    pass


class InvalidBandwidthError(PoseKitError):
    pass


class InsufficientHypothesesError(PoseKitError):
    pass


class InsufficientAxesError(PoseKitError):
    pass


class InsufficientSamplesError(PoseKitError):
    pass


class InvalidConcentrationError(PoseKitError):
    pass


class InvalidRelaxationError(PoseKitError):
    pass


class NoActiveHypothesesError(PoseKitError):
    pass


class WidthMismatchError(PoseKitError):
    pass


class InvalidDepthError(PoseKitError):
    pass


class EmptyPointSetError(PoseKitError):
    pass


class EmptyDatasetError(PoseKitError):
    pass


class ConfigError(PoseKitError):
    pass


class VersionMismatchError(PoseKitError):
    pass


class FormatError(PoseKitError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalError(PoseKitError, ArithmeticError):
    exit_code = 3


class TrainingDivergedError(NumericalError):
    pass


# Warning categories
class ConvergenceWarning(RuntimeWarning):
    pass


class WideSpreadWarning(RuntimeWarning):
    pass


class SaturationWarning(RuntimeWarning):
    pass
