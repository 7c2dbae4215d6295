"""Global scale/shift alignment of relative depth to metric depth.

Monocular depth networks are accurate up to an unknown monotone transform;
metric sensors are sparse or noisy but carry absolute scale.  This module
fits one global pair ``(alpha, beta)`` in inverse-depth space::

    1/d_metric  ~=  alpha * (1/d_relative) + beta

by least squares over every jointly valid pixel of a sequence, then maps
whole relative-depth sequences into metric space with the fitted transform.
The fit is closed form (2x2 normal equations) with sums accumulated in
extended precision, so frame order and chunking cannot disturb the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .camera import Intrinsics, RigidPose, backproject
from .errors import (
    DegenerateVariance,
    InsufficientSamples,
    NoValidDepth,
    ShapeMismatch,
)

__all__ = [
    "DepthSequence",
    "AlignmentParams",
    "solve_scale_shift",
    "apply_alignment",
    "depth_centroid",
    "KIND_RELATIVE",
    "KIND_METRIC",
]

KIND_RELATIVE = "relative"
KIND_METRIC = "metric"
_KINDS = frozenset({KIND_RELATIVE, KIND_METRIC})

# Inverse depths spanning less than this are treated as constant: the
# scale of the fit is unobservable.
_VARIANCE_EPS = 1e-12


@dataclass(frozen=True)
class DepthSequence:
    """Per-frame depth maps with validity flags.

    frames holds meters (metric) or unitless inverse-scale depth
    (relative); validity marks pixels that are finite and positive.
    Invalid pixels carry the value 0.  Frames are kept in float64 so an
    exactly linear inverse-depth relation between two sequences survives
    into the solver; codecs may still quantize on disk.
    """

    frames: NDArray[np.float64]  # (T, H, W)
    validity: NDArray[np.bool_]  # (T, H, W)
    kind: str  # "relative" | "metric"

    def __post_init__(self) -> None:
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 3 or frames.shape[0] < 1:
            raise ValueError(f"frames must have shape (T, H, W), got {frames.shape}")
        validity = np.asarray(self.validity, dtype=bool)
        if validity.shape != frames.shape:
            raise ShapeMismatch(
                f"validity shape {validity.shape} != frames shape {frames.shape}"
            )
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {sorted(_KINDS)}, got {self.kind!r}")
        flagged = frames[validity]
        if flagged.size and not (np.all(np.isfinite(flagged)) and np.all(flagged > 0)):
            raise ValueError("valid pixels must be finite and positive")

        frames = frames.copy()
        frames[~validity] = 0.0
        frames.setflags(write=False)
        validity = validity.copy()
        validity.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "validity", validity)

    @classmethod
    def from_frames(cls, frames, kind: str) -> "DepthSequence":
        """Wrap raw depth frames, deriving validity as finite-and-positive."""
        arr = np.asarray(frames, dtype=np.float64)
        return cls(arr, np.isfinite(arr) & (arr > 0), kind)

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def resolution(self) -> tuple[int, int]:
        """(height, width)"""
        return self.frames.shape[1], self.frames.shape[2]


@dataclass(frozen=True)
class AlignmentParams:
    """Fitted inverse-depth transform and its fit diagnostics."""

    alpha: float  # scale on inverse relative depth
    beta: float  # shift, units 1/m
    rms_residual: float  # RMS of inverse-depth residuals at the optimum
    sample_count: int  # jointly valid pixels used by the fit

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "rms_residual"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.rms_residual < 0:
            raise ValueError("rms_residual must be non-negative")
        if self.sample_count < 2:
            raise ValueError("sample_count must be at least 2")


def solve_scale_shift(relative: DepthSequence, metric: DepthSequence) -> AlignmentParams:
    """Fit ``1/d_metric ~= alpha/d_relative + beta`` over jointly valid pixels.

    The minimizer of the summed squared inverse-depth residual is computed
    from centered 2x2 normal equations.  All sums are accumulated in
    extended precision so the result is stable against frame ordering and
    large pixel counts.

    Raises:
        ShapeMismatch: sequences differ in resolution or frame count.
        InsufficientSamples: fewer than 2 jointly valid pixels.
        DegenerateVariance: relative inverse depths are all equal within
            1e-12; the scale is unobservable.
    """
    if relative.kind != KIND_RELATIVE:
        raise ValueError(f"first argument must be a relative sequence, got {relative.kind!r}")
    if metric.kind != KIND_METRIC:
        raise ValueError(f"second argument must be a metric sequence, got {metric.kind!r}")
    if relative.frames.shape != metric.frames.shape:
        raise ShapeMismatch(
            f"sequence shapes differ: {relative.frames.shape} vs {metric.frames.shape}"
        )

    joint = relative.validity & metric.validity
    n = int(np.count_nonzero(joint))
    if n < 2:
        raise InsufficientSamples(f"need >= 2 jointly valid pixels, got {n}")

    x = 1.0 / relative.frames[joint].astype(np.float64)
    y = 1.0 / metric.frames[joint].astype(np.float64)
    if float(x.max() - x.min()) < _VARIANCE_EPS:
        raise DegenerateVariance("relative inverse depth is constant; scale unobservable")

    # Centered accumulation in extended precision controls cancellation on
    # large frames without changing the closed-form optimum.
    xl = x.astype(np.longdouble)
    yl = y.astype(np.longdouble)
    x_mean = xl.sum() / n
    y_mean = yl.sum() / n
    dx = xl - x_mean
    dy = yl - y_mean
    sxx = np.sum(dx * dx)
    sxy = np.sum(dx * dy)

    alpha = sxy / sxx
    beta = y_mean - alpha * x_mean
    resid = dy - alpha * dx
    rms = math.sqrt(float(np.sum(resid * resid) / n))
    return AlignmentParams(float(alpha), float(beta), rms, n)


def apply_alignment(sequence: DepthSequence, params: AlignmentParams) -> DepthSequence:
    """Map a relative sequence into metric space with fitted parameters.

    Output depth is ``1 / (alpha / d + beta)``.  A pixel stays valid only
    if it was valid in the input and its aligned inverse depth is positive;
    everything else is flagged invalid.
    """
    inv = np.zeros(sequence.frames.shape, dtype=np.float64)
    valid = sequence.validity
    inv[valid] = params.alpha / sequence.frames[valid].astype(np.float64) + params.beta
    positive = valid & (inv > 0) & np.isfinite(inv)

    aligned = np.zeros_like(inv)
    aligned[positive] = 1.0 / inv[positive]
    return DepthSequence(aligned, positive, KIND_METRIC)


def depth_centroid(
    depth_frame,
    intrinsics: Intrinsics,
    pose: RigidPose,
    validity=None,
) -> NDArray[np.float64]:
    """Arithmetic mean of the back-projected valid pixels of one depth frame.

    Used as the pivot for virtual-view orbits.  ``validity`` defaults to
    finite-and-positive.

    Raises:
        NoValidDepth: the frame has no valid pixel.
    """
    depth = np.asarray(depth_frame, dtype=np.float64)
    if depth.ndim != 2:
        raise ValueError(f"depth_frame must be 2-D, got shape {depth.shape}")
    if validity is None:
        valid = np.isfinite(depth) & (depth > 0)
    else:
        valid = np.asarray(validity, dtype=bool)
        if valid.shape != depth.shape:
            raise ShapeMismatch("validity shape differs from depth frame")
        valid = valid & np.isfinite(depth) & (depth > 0)
    if not valid.any():
        raise NoValidDepth("no valid pixel in depth frame")

    rows, cols = np.nonzero(valid)
    pixels = np.stack([cols.astype(np.float64), rows.astype(np.float64)], axis=1)
    points = backproject(pixels, depth[valid], intrinsics, pose)
    return points.mean(axis=0)
