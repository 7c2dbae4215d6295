"""Exception types raised across the nvsforge pipeline.

Every error below derives from :class:`NvsforgeError` so callers can catch
pipeline failures with a single except clause while still being able to
distinguish individual failure modes.  Construction-time invariant
violations raise immediately; no type in this package carries a latent
"invalid" state.
"""


class NvsforgeError(Exception):
    """Base class for all nvsforge errors."""


# --- camera ---------------------------------------------------------------


class DegenerateLookAt(NvsforgeError):
    """View direction is zero or parallel to the up hint."""


class BadRange(NvsforgeError):
    """Angular sampling range is empty, inverted, or out of bounds."""


class BehindCamera(NvsforgeError):
    """Point projects from behind the camera (non-positive depth)."""


class NonPositiveDepth(NvsforgeError):
    """Back-projection requested with depth <= 0."""


# --- depth alignment ------------------------------------------------------


class InsufficientSamples(NvsforgeError):
    """Fewer than two jointly valid pixels were available for the fit."""


class DegenerateVariance(NvsforgeError):
    """All observed inverse depths are equal; scale is unobservable."""


class NoValidDepth(NvsforgeError):
    """A depth frame contains no valid pixel."""


# --- meshing --------------------------------------------------------------


class TooSmall(NvsforgeError):
    """Input grid is smaller than 2x2 after striding."""


class NoValidGeometry(NvsforgeError):
    """No quad with four valid corners exists; nothing to mesh."""


# --- rendering ------------------------------------------------------------


class EmptyMesh(NvsforgeError):
    """Mesh contains no faces."""


class LengthMismatch(NvsforgeError):
    """Sequence lengths disagree and cannot be broadcast."""


# --- pairing --------------------------------------------------------------


class ShapeMismatch(NvsforgeError):
    """Array shapes disagree where identical shapes are required."""


class EmptyInput(NvsforgeError):
    """An operation received an empty sequence where >= 1 item is required."""


# --- metrics --------------------------------------------------------------


class FrameTooSmall(NvsforgeError):
    """Frame is smaller than the analysis window."""


# --- asset io -------------------------------------------------------------


class AssetIOError(NvsforgeError):
    """Base class for persistence failures."""


class DecodeError(AssetIOError):
    """File exists but cannot be decoded as the expected format."""


class MissingFrame(AssetIOError):
    """A frame index referenced by a manifest is absent on disk."""


class ResolutionMismatch(AssetIOError):
    """An asset's resolution disagrees with its manifest."""


class UnsupportedFormat(AssetIOError):
    """Unknown codec or schema identifier."""


class WriteError(AssetIOError):
    """An asset could not be written."""


class ManifestError(AssetIOError):
    """Manifest is malformed or fails validation."""
