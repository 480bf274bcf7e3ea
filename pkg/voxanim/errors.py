"""Exception hierarchy.

Every error is a ValueError carrying a complete message. ``category`` tells the
CLI which exit code to use.
"""

IO = "io"
PARSE = "parse"
VALIDATION = "validation"


class VoxanimError(ValueError):
    category = VALIDATION


# geometry


class DegenerateRotationError(VoxanimError):
    pass


class NegativeRayParameterError(VoxanimError):
    pass


class DegenerateVectorError(VoxanimError):
    pass


class InvalidTransformError(VoxanimError):
    pass


# svo


class GridResolutionError(VoxanimError):
    pass


class DepthRangeError(VoxanimError):
    pass


class SvoFormatError(VoxanimError):
    category = PARSE


class BadMagicError(SvoFormatError):
    pass


class UnsupportedVersionError(SvoFormatError):
    pass


class TruncatedPayloadError(SvoFormatError):
    pass


class TrailingDataError(SvoFormatError):
    pass


class IndexOutOfRangeError(SvoFormatError):
    pass


class InvalidNodeError(SvoFormatError):
    pass


class ModelValidationError(VoxanimError):
    pass


# ingest


class BinvoxError(VoxanimError):
    category = PARSE


class BinvoxHeaderError(BinvoxError):
    pass


class BinvoxDimensionError(BinvoxError):
    pass


class TruncatedRleError(BinvoxError):
    pass


class UnknownPrimitiveError(VoxanimError):
    pass


class UnknownColorModeError(VoxanimError):
    pass


class GridShapeError(VoxanimError):
    pass


# scene


class SceneError(VoxanimError):
    pass


class SceneFormatError(SceneError):
    category = PARSE


class ModelNotFoundError(SceneError):
    category = IO

    def __init__(self, path, location=None):
        self.path = str(path)
        where = f" (referenced at {location})" if location else ""
        super().__init__(f"Model not found: {self.path}{where}")


class ModelReadError(SceneError):
    category = IO


class UnknownModelError(SceneError):
    pass


class DuplicateObjectIdError(SceneError):
    pass


class UnknownTrackObjectError(SceneError):
    pass


class UnsortedKeyframesError(SceneError):
    pass


class BadRotationError(SceneError):
    pass


class CameraError(SceneError):
    pass


class NegativeTimeError(SceneError):
    pass


# traversal


class InvalidBoundsError(VoxanimError):
    pass


# renderer


class PixelOutOfRangeError(VoxanimError):
    pass


class BufferSizeMismatchError(VoxanimError):
    pass


class PoolMismatchError(VoxanimError):
    pass


class InvalidModeError(VoxanimError):
    pass
