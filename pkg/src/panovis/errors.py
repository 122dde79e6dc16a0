"""Exception types shared across the package.

Every error carries a stable ``code`` (its class name) so the CLI and the
HTTP service can emit structured diagnostics without string matching.
"""

from __future__ import annotations


class PanovisError(Exception):
    """Base class for all package errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# --- session loading -------------------------------------------------------

class MissingFile(PanovisError):
    pass


class MalformedRecord(PanovisError):
    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = f"{path}:{line}: " if path and line is not None else ""
        super().__init__(f"{where}{message}")


class InconsistentFrameDimensions(PanovisError):
    pass


class NonMonotoneTimestamps(PanovisError):
    pass


class EmptyFrameList(PanovisError):
    pass


# --- feature detection and matching ---------------------------------------

class UnsupportedDetector(PanovisError):
    pass


class ImageTooSmall(PanovisError):
    pass


class DescriptorLengthMismatch(PanovisError):
    pass


class TrainSetTooSmall(PanovisError):
    pass


# --- geometry --------------------------------------------------------------

class PointAtInfinity(PanovisError):
    pass


class InsufficientPairs(PanovisError):
    pass


class DegenerateConfiguration(PanovisError):
    pass


class NoModelFound(PanovisError):
    pass


class SingularNormalEquations(PanovisError):
    pass


# --- homography filtering --------------------------------------------------

class BaseFrameMissing(PanovisError):
    pass


# --- panorama construction -------------------------------------------------

class InvalidRange(PanovisError):
    pass


class CanvasTooLarge(PanovisError):
    pass


class BaseFrameUnstitchable(PanovisError):
    pass


class AllFramesExcluded(PanovisError):
    pass


class DetectionOnExcludedFrame(PanovisError):
    pass


# --- service ---------------------------------------------------------------

class SessionNotFound(PanovisError):
    pass


class PanoramaNotFound(PanovisError):
    pass


class MissingPanorama(PanovisError):
    pass


class UnknownLabelColor(UserWarning):
    """Warning emitted when the label palette wraps around."""
