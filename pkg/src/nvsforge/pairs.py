"""Bi-directionally masked training pairs and conditioning bundles.

Given a source video and its aligned depth, one seeded virtual camera is
drawn by orbiting the source view about the depth centroid of the first
frame, and the camera then stays fixed for the whole sequence.  Each frame
gets a visibility-derived occlusion mask ``M`` (1 = requires synthesis);
the *forward* pair masks the video with ``M`` and the *complement* pair
with ``1 - M``, so the two together cover every pixel exactly once.  Both
pairs share the unmasked video as the reconstruction target.

Masked frames are literal element-wise products ``frame * (1 - mask)``;
all invariants hold bit-exactly and are enforced at construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .camera import Intrinsics, RigidPose, sample_virtual_view
from .depthalign import DepthSequence, depth_centroid
from .dwmesh import MeshConfig, build_frame_mesh
from .errors import EmptyInput, ShapeMismatch
from .render import RenderOutput, source_visibility_mask

__all__ = [
    "DEFAULT_PROMPT",
    "DIRECTION_FORWARD",
    "DIRECTION_COMPLEMENT",
    "TrainingPair",
    "ConditioningBundle",
    "mask_frames",
    "complement_masks",
    "make_training_pairs",
    "assemble_training_pairs",
    "make_conditioning_bundle",
]

# Fixed text prompt attached to every conditioning bundle unless the
# caller supplies one.
DEFAULT_PROMPT = "A robot arm manipulates objects on a tabletop."

DIRECTION_FORWARD = "forward"
DIRECTION_COMPLEMENT = "complement"
_DIRECTIONS = frozenset({DIRECTION_FORWARD, DIRECTION_COMPLEMENT})


def _check_video(video, name: str) -> NDArray[np.uint8]:
    arr = np.asarray(video)
    if arr.ndim != 4 or arr.shape[3] != 3 or arr.dtype != np.uint8:
        raise ValueError(f"{name} must be (T, H, W, 3) uint8, got {arr.shape} {arr.dtype}")
    return arr


def _check_mask_video(masks, name: str) -> NDArray[np.uint8]:
    arr = np.asarray(masks)
    if arr.ndim != 3 or arr.dtype != np.uint8:
        raise ValueError(f"{name} must be (T, H, W) uint8, got {arr.shape} {arr.dtype}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError(f"{name} values must be 0 or 1")
    return arr


def mask_frames(video, masks) -> NDArray[np.uint8]:
    """Zero out masked pixels: ``frame * (1 - mask)`` per frame, bit-exact.

    Raises:
        ShapeMismatch: mask grid does not match the video frames.
    """
    video = _check_video(video, "video")
    masks = _check_mask_video(masks, "masks")
    if masks.shape != video.shape[:3]:
        raise ShapeMismatch(f"masks shape {masks.shape} != video shape {video.shape[:3]}")
    return np.where(masks[..., None] == 1, np.uint8(0), video)


def complement_masks(masks) -> NDArray[np.uint8]:
    """Flip occlusion masks: ``1 - mask``.  An involution."""
    masks = _check_mask_video(masks, "masks")
    return (1 - masks).astype(np.uint8)


@dataclass(frozen=True)
class TrainingPair:
    """One masked-video training example.

    ``masked_video`` equals ``target_video`` wherever ``mask_video`` is 0
    and is zero wherever it is 1; the pair records which polarity it is
    (forward masks occluded content, complement masks the rest) and the
    signed virtual-view angle that produced the masks.
    """

    masked_video: NDArray[np.uint8]  # (T, H, W, 3)
    mask_video: NDArray[np.uint8]  # (T, H, W), 1 = masked out
    target_video: NDArray[np.uint8]  # (T, H, W, 3)
    theta_deg: float
    direction: str

    def __post_init__(self) -> None:
        masked = _check_video(self.masked_video, "masked_video")
        target = _check_video(self.target_video, "target_video")
        masks = _check_mask_video(self.mask_video, "mask_video")
        if masked.shape != target.shape:
            raise ShapeMismatch("masked_video and target_video shapes differ")
        if masks.shape != target.shape[:3]:
            raise ShapeMismatch("mask_video shape does not match videos")
        if target.shape[0] < 1:
            raise EmptyInput("pair must contain at least one frame")
        if not math.isfinite(self.theta_deg):
            raise ValueError("theta_deg must be finite")
        if self.direction not in _DIRECTIONS:
            raise ValueError(f"direction must be one of {sorted(_DIRECTIONS)}")
        expected = np.where(masks[..., None] == 1, np.uint8(0), target)
        if not np.array_equal(masked, expected):
            raise ValueError("masked_video is not target_video with mask applied")
        for name in ("masked_video", "mask_video", "target_video"):
            arr = getattr(self, name).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def frame_count(self) -> int:
        return self.target_video.shape[0]


@dataclass(frozen=True)
class ConditioningBundle:
    """Inputs handed to the synthesis model for one virtual view.

    Holds the reference first frame, the masked rendered video, the
    per-frame occlusion masks, and the fixed text prompt.
    """

    reference_frame: NDArray[np.uint8]  # (H, W, 3)
    masked_video: NDArray[np.uint8]  # (T, H, W, 3), zero where masked
    mask_video: NDArray[np.uint8]  # (T, H, W)
    prompt: str

    def __post_init__(self) -> None:
        ref = np.asarray(self.reference_frame)
        if ref.ndim != 3 or ref.shape[2] != 3 or ref.dtype != np.uint8:
            raise ValueError("reference_frame must be (H, W, 3) uint8")
        masked = _check_video(self.masked_video, "masked_video")
        masks = _check_mask_video(self.mask_video, "mask_video")
        if masked.shape[0] < 1:
            raise EmptyInput("bundle must contain at least one frame")
        if masked.shape[:3] != masks.shape:
            raise ShapeMismatch("masked_video and mask_video shapes differ")
        if masked.shape[1:3] != ref.shape[:2]:
            raise ShapeMismatch("reference_frame resolution differs from video")
        if np.any(masked[masks == 1] != 0):
            raise ValueError("masked_video must be zero at masked pixels")
        if not self.prompt or not self.prompt.strip():
            raise ValueError("prompt must be non-empty")
        for name in ("reference_frame", "masked_video", "mask_video"):
            arr = getattr(self, name).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def frame_count(self) -> int:
        return self.masked_video.shape[0]


def make_training_pairs(
    video,
    aligned_depth: DepthSequence,
    intrinsics: Intrinsics,
    source_pose: RigidPose,
    mesh_config: MeshConfig | None = None,
    magnitude_range_deg: tuple[float, float] = (20.0, 60.0),
    seed: int = 0,
    visibility_bias: float = 1e-3,
) -> tuple[TrainingPair, TrainingPair]:
    """Build the forward and complement training pairs for one video.

    One virtual camera is sampled (seeded) by orbiting ``source_pose``
    about the depth centroid of the first frame and is reused for every
    frame.  Per-frame masks mark source pixels that the virtual camera
    cannot see.

    Returns:
        ``(forward, complement)`` sharing masks related by complement and
        the original video as target.
    """
    video = _check_video(video, "video")
    if video.shape[0] < 1:
        raise EmptyInput("video must contain at least one frame")
    if video.shape[:3] != aligned_depth.frames.shape:
        raise ShapeMismatch(
            f"video shape {video.shape[:3]} != depth shape {aligned_depth.frames.shape}"
        )
    mesh_config = mesh_config or MeshConfig()

    centroid = depth_centroid(
        aligned_depth.frames[0],
        intrinsics,
        source_pose,
        validity=aligned_depth.validity[0],
    )
    theta, virtual_pose = sample_virtual_view(
        centroid, source_pose, magnitude_range_deg, seed
    )

    masks = np.empty(video.shape[:3], dtype=np.uint8)
    for t in range(video.shape[0]):
        mesh = build_frame_mesh(
            video[t], aligned_depth.frames[t], intrinsics, source_pose, mesh_config
        )
        masks[t] = source_visibility_mask(
            mesh, intrinsics, source_pose, virtual_pose, visibility_bias
        )

    return assemble_training_pairs(video, masks, theta)


def assemble_training_pairs(
    video, masks, theta_deg: float
) -> tuple[TrainingPair, TrainingPair]:
    """Package per-frame masks and a video into the forward/complement pair.

    Split out of :func:`make_training_pairs` so a caller that computes
    the masks itself (e.g. spread over workers) packages them the same
    way.
    """
    video = _check_video(video, "video")
    masks = _check_mask_video(masks, "masks")
    if video.shape[:3] != masks.shape:
        raise ShapeMismatch(f"video shape {video.shape[:3]} != mask shape {masks.shape}")
    inverse = complement_masks(masks)
    forward = TrainingPair(
        masked_video=mask_frames(video, masks),
        mask_video=masks,
        target_video=video,
        theta_deg=theta_deg,
        direction=DIRECTION_FORWARD,
    )
    complement = TrainingPair(
        masked_video=mask_frames(video, inverse),
        mask_video=inverse,
        target_video=video,
        theta_deg=theta_deg,
        direction=DIRECTION_COMPLEMENT,
    )
    return forward, complement


def make_conditioning_bundle(
    source_video,
    rendered_views: list[RenderOutput],
    prompt: str = DEFAULT_PROMPT,
) -> ConditioningBundle:
    """Assemble the model inputs for one virtual view of one video.

    Takes the source video (for the reference first frame) and the
    per-frame renders from the virtual camera; the renders already carry
    occlusion masks and zeroed masked pixels.

    Raises:
        EmptyInput: no frames or no rendered views.
    """
    video = _check_video(source_video, "source_video")
    if video.shape[0] < 1:
        raise EmptyInput("source_video must contain at least one frame")
    renders = list(rendered_views)
    if not renders:
        raise EmptyInput("rendered_views must contain at least one view")
    masked = np.stack([r.rgb for r in renders])
    masks = np.stack([r.mask for r in renders])
    return ConditioningBundle(
        reference_frame=video[0],
        masked_video=masked,
        mask_video=masks,
        prompt=prompt,
    )
