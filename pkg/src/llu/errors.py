"""Exception hierarchy shared by all llu modules."""


class LluError(Exception):
    """Base class for all errors raised by this package."""


class ZeroVector(LluError):
    """A vector with (near-)zero norm where a direction is required."""


class DimMismatch(LluError):
    """Operands with incompatible dimensions."""


class InvalidSet(LluError):
    """A feature or class-embedding set violating its invariants."""


class IoError(LluError):
    """Underlying file I/O failure."""


class BadMagic(LluError):
    """Feature file does not start with the expected magic bytes."""


class UnsupportedVersion(LluError):
    """Feature file declares a version this reader does not understand."""


class CorruptRecord(LluError):
    """Feature file truncated or inconsistent with its declared counts."""

    def __init__(self, message, offset=None):
        super().__init__(message if offset is None else f"{message} (at byte {offset})")
        self.offset = offset


class UnnormalizedVector(LluError):
    """Stored vector whose norm is outside the accepted band."""


class LabelOutOfRange(LluError):
    """Record label >= declared number of classes."""


class EmptyAnchorSet(LluError):
    """Mask mode requires anchors but none were supplied."""


class EmptyInput(LluError):
    """Empty input where at least one element is required."""


class DegenerateCluster(LluError):
    """A cluster whose member mean has (near-)zero norm."""


class NonFiniteLoss(LluError):
    """Training loss became NaN or infinite."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class UnknownPreset(LluError):
    """Ablation preset name not recognized."""


class TooFewClasses(LluError):
    """Base/new split needs at least two classes."""


class EmptyEvaluationSet(LluError):
    """No records left to evaluate after restriction."""
