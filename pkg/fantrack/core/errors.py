"""Exception hierarchy for fantrack.

Domain errors also derive from the closest builtin so callers that only know
about ``ValueError`` and friends keep working.
"""
from typing import Any, Optional


class FantrackError(Exception):
    """Base class for every error raised by fantrack."""


class ConfigError(FantrackError, ValueError):
    """Invalid or unknown configuration value."""


# geometry
class BehindCamera(FantrackError, ValueError):
    """A point lies on or behind the camera plane (Z_C <= 1e-6)."""


class NonPositiveDepth(FantrackError, ValueError):
    """Back-projection requested with depth <= 0."""


# meshes and rendering
class InvalidMesh(FantrackError, ValueError):
    """Mesh arrays violate the TriangleMesh invariants."""


class DegenerateMesh(FantrackError, ValueError):
    """No triangle of the mesh projects in front of the camera."""


# viewpoint templates
class InsufficientCoverage(FantrackError, ValueError):
    """A rendered view has too few boundary or interior pixels to sample."""


class TemplateFormatError(FantrackError, ValueError):
    """A template file cannot be parsed."""


class VersionMismatch(TemplateFormatError):
    """Template file written by an unsupported format version."""


class ChecksumMismatch(TemplateFormatError):
    """Template file CRC does not match its contents (truncated or corrupt)."""


class StaleTemplates(FantrackError, ValueError):
    """Templates were generated from a different mesh."""


# segmentation
class EmptyRegion(FantrackError, ValueError):
    """Foreground or background region of a color update is empty.

    The unchanged model is attached so callers can carry on with it.
    """

    def __init__(self, message: str, model: Any = None):
        super().__init__(message)
        self.model = model


class OutOfRoi(FantrackError, ValueError):
    """A sample position lies outside the probability map ROI."""


# contour modality
class InvalidCorrespondence(FantrackError, ValueError):
    """Residual requested for a correspondence flagged invalid."""


class NonPositiveWeight(FantrackError, ValueError):
    """Mixture weights must both be strictly positive."""


# interior modality
class RoiTooSmall(FantrackError, ValueError):
    """The flow ROI is too small for a pyramid down to the finest flow scale."""


class PatchOutOfBounds(FantrackError, ValueError):
    """The confidence patch around a point leaves the flow ROI."""


# optimisation and tracking
class SingularSystem(FantrackError, ArithmeticError):
    """Regularised normal equations could not be factorised."""


class ObjectOutOfView(FantrackError, ValueError):
    """The object does not project into the image."""


class LostTrack(FantrackError):
    """Too few valid contour correspondences survived optimisation.

    ``state`` holds the tracker state to continue from (unchanged apart from
    the frame counter).
    """

    def __init__(self, message: str, state: Optional[Any] = None, frame_index: int = -1):
        super().__init__(message)
        self.state = state
        self.frame_index = frame_index


# benchmark harness
class MissingFrames(FantrackError, ValueError):
    """Sequence directory has no frames or frame/pose counts disagree."""


class MalformedPoseLine(FantrackError, ValueError):
    """A ground-truth pose line does not hold the expected numbers."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class MissingGroundTruth(FantrackError, ValueError):
    """Evaluation needs ground-truth poses the sequence does not have."""
