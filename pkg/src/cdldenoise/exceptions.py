"""Exception types shared across the pipeline."""


class CdlError(Exception):
    """Base class for all library errors."""


class UnsupportedFormat(CdlError):
    """Raster payload is not 8-bit binary PGM/PPM with maxval 255."""


class TruncatedData(CdlError):
    """Byte stream ends before the declared payload."""


class DimensionMismatch(CdlError):
    """Paired images or matrices disagree in shape."""


class PatchTooLarge(CdlError):
    """Patch side exceeds an image dimension."""


class AlreadyCentered(CdlError):
    """DC components were already removed from the patch matrix."""


class EmptyCorpus(CdlError):
    """No image pairs available to build a training set."""


class ZeroAtom(CdlError):
    """A dictionary atom has (near-)zero norm."""


class CorpusTooSmall(CdlError):
    """Fewer training columns than dictionary atoms."""


class BadMagic(CdlError):
    """File does not start with the expected magic bytes."""


class ShapeMismatch(CdlError):
    """Header dimensions are inconsistent with the payload size."""


class TooFewPatches(CdlError):
    """Fewer patches than requested clusters."""


class GridMismatch(CdlError):
    """Patch grid does not match the image geometry."""


class EmptyList(CdlError):
    """Operation requires at least one element."""
