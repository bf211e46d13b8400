"""Exception types shared across the package."""


class HeliogenError(Exception):
    """Base class for all package errors."""


# data ingestion / preprocessing

class MissingFile(HeliogenError):
    pass


class MalformedFits(HeliogenError):
    pass


class MissingHeaderKey(HeliogenError):
    pass


class NonFiniteResult(HeliogenError):
    pass


class UnsortedInput(HeliogenError):
    pass


class InvalidSize(HeliogenError):
    pass


class EmptySplitWarning(UserWarning):
    """One side of a train/test split came out empty. Warning, not fatal."""


# models / losses

class InvalidSpec(HeliogenError):
    pass


class ShapeMismatch(HeliogenError):
    pass


class DomainError(HeliogenError):
    pass


# training / checkpoints

class EmptyTrainSet(HeliogenError):
    pass


class DivergenceDetected(HeliogenError):
    """A loss went non-finite. Carries the paths of checkpoints saved so far."""

    def __init__(self, message, checkpoints=None, log_path=None):
        super().__init__(message)
        self.checkpoints = list(checkpoints or [])
        self.log_path = log_path


class IoFailure(HeliogenError):
    pass


class OverwriteRequired(HeliogenError):
    """Output already exists and --overwrite was not given."""


class DigestMismatch(HeliogenError):
    pass


class ArchitectureMismatch(HeliogenError):
    pass


# metrics

class ZeroDenominator(HeliogenError):
    pass


class ConstantImage(HeliogenError):
    pass


class ImageTooSmall(HeliogenError):
    pass
