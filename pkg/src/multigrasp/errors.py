"""Exception hierarchy.

Everything raised deliberately by the package derives from ``GraspError``.
The CLI maps ``ConfigError`` to exit code 2, ``DataError`` to 3 and
``CheckFailure`` to 4.
"""


class GraspError(Exception):
    pass


class ConfigError(GraspError, ValueError):
    pass


class DataError(GraspError, ValueError):
    """Malformed or inconsistent input data."""

    def __init__(self, message, source=None):
        self.source = source
        if source is not None:
            message = f"{source}: {message}"
        super().__init__(message)


class CheckFailure(GraspError):
    pass


# geometry
class InvalidRect(GraspError, ValueError):
    pass


class NonRectangular(DataError):
    pass


# parsers
class MalformedLine(DataError):
    pass


class TruncatedGroup(DataError):
    pass


class UnsupportedEncoding(DataError):
    pass


class MissingField(DataError):
    pass


class IndexOutOfRange(DataError):
    pass


class BadMagic(DataError):
    pass


class BadMaxval(DataError):
    pass


class ShortPayload(DataError):
    pass


class BadHeader(DataError):
    pass


class DimensionMismatch(DataError):
    pass


# augmentation
class SingularTransform(GraspError, ValueError):
    pass


class NonSimilarity(GraspError, ValueError):
    pass


# encoding
class NullClassHasNoAngle(GraspError, ValueError):
    pass


class EmptyGroundTruth(GraspError, ValueError):
    pass


# autodiff
class ShapeMismatch(GraspError, ValueError):
    pass


class LabelOutOfRange(GraspError, ValueError):
    pass


# detector
class NoSampledAnchors(GraspError, ValueError):
    pass


class NoSampledRois(GraspError, ValueError):
    pass


class NonFiniteLoss(GraspError, FloatingPointError):
    pass


class IncompatibleCheckpoint(DataError):
    pass


# evaluation
class EmptyDataset(GraspError, ValueError):
    pass


class NoDetections(GraspError, ValueError):
    pass
