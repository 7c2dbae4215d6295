"""Pinhole camera model, viewing-cone rig, and seeded virtual-view sampling.

Conventions used throughout the package:

* World frame: right-handed, z up.  Distances are meters, angles degrees.
* Camera frame: +z points forward along the optical axis, +x right,
  +y down (image row direction).
* A :class:`RigidPose` maps world to camera: ``x_cam = R @ x_world + t``.
  The camera center in world coordinates is ``-R.T @ t``.
* Pixel coordinates: ``u`` runs along image width (columns), ``v`` along
  height (rows).  The pixel at row ``r``, column ``c`` samples the
  continuous image plane at exactly ``(u, v) = (c, r)``.
* Azimuth 0 places the camera on the world +y side of the rig center so
  that it looks along world -y toward the center; positive azimuth moves
  the camera counterclockwise about world +z when viewed from above.
* Random view sampling uses the Philox 4x32-10 counter-based generator
  (``numpy.random.Philox``) keyed directly by the seed, so a seed maps to
  the same view on every platform.  Draw order: one sign bit via
  ``integers(0, 2)`` (0 means negative), then the magnitude in degrees via
  ``uniform(lo, hi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import BadRange, BehindCamera, DegenerateLookAt, NonPositiveDepth

__all__ = [
    "Intrinsics",
    "RigidPose",
    "RigSpec",
    "look_at",
    "generate_rig",
    "preset_rig_inference",
    "apply_view_offset",
    "rotate_pose_about_vertical",
    "sample_virtual_view",
    "project",
    "backproject",
]

_PARALLEL_EPS = 1e-12
_ORTHONORMAL_TOL = 1e-9

# Azimuth offsets (degrees) applied around a base view when synthesizing
# the standard four-view inference set.
INFERENCE_AZIMUTH_OFFSETS_DEG = (-20.0, -10.0, 10.0, 20.0)


def _as_vec3(value, name: str) -> NDArray[np.float64]:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have shape (3,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _frozen(arr: NDArray[np.float64]) -> NDArray[np.float64]:
    out = arr.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics for a fixed image resolution."""

    fx: float  # focal length, pixels
    fy: float
    cx: float  # principal point, pixels
    cy: float
    width: int  # image size, pixels
    height: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.fx) and math.isfinite(self.fy)):
            raise ValueError("focal lengths must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (math.isfinite(self.cx) and math.isfinite(self.cy)):
            raise ValueError("principal point must be finite")
        if int(self.width) != self.width or int(self.height) != self.height:
            raise ValueError("image size must be integral")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")

    def to_matrix(self) -> NDArray[np.float64]:
        """Return the 3x3 intrinsic matrix K."""
        return np.array(
            [
                [self.fx, 0.0, self.cx],
                [0.0, self.fy, self.cy],
                [0.0, 0.0, 1.0],
            ]
        )


@dataclass(frozen=True)
class RigidPose:
    """World-to-camera rigid transform ``x_cam = rotation @ x_world + translation``."""

    rotation: NDArray[np.float64]  # (3, 3) row-orthonormal, det +1
    translation: NDArray[np.float64]  # (3,)

    def __post_init__(self) -> None:
        rot = np.asarray(self.rotation, dtype=np.float64)
        if rot.shape != (3, 3):
            raise ValueError(f"rotation must have shape (3, 3), got {rot.shape}")
        if not np.all(np.isfinite(rot)):
            raise ValueError("rotation must be finite")
        if not np.allclose(rot.T @ rot, np.eye(3), rtol=0.0, atol=_ORTHONORMAL_TOL):
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(rot) - 1.0) > _ORTHONORMAL_TOL:
            raise ValueError("rotation determinant is not +1 within 1e-9")
        trans = _as_vec3(self.translation, "translation")
        object.__setattr__(self, "rotation", _frozen(rot))
        object.__setattr__(self, "translation", _frozen(trans))

    @property
    def camera_center(self) -> NDArray[np.float64]:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    @classmethod
    def identity(cls) -> "RigidPose":
        return cls(np.eye(3), np.zeros(3))


@dataclass(frozen=True)
class RigSpec:
    """Viewing-cone capture rig: cameras on a circle looking at one point.

    Default values reproduce the standard tabletop capture rig: cameras at
    1.70 m from the workspace center, elevated 45 degrees, one pose every
    10 degrees of azimuth within +/-60 degrees (13 poses).
    """

    center: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    distance_m: float = 1.70
    elevation_deg: float = 45.0
    azimuth_step_deg: float = 10.0
    azimuth_halfrange_deg: float = 60.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _frozen(_as_vec3(self.center, "center")))
        if not math.isfinite(self.distance_m) or self.distance_m <= 0:
            raise ValueError("distance_m must be positive and finite")
        if not math.isfinite(self.elevation_deg) or not 0.0 <= self.elevation_deg <= 90.0:
            raise ValueError("elevation_deg must lie in [0, 90]")
        if not math.isfinite(self.azimuth_step_deg) or self.azimuth_step_deg <= 0:
            raise ValueError("azimuth_step_deg must be positive and finite")
        if not math.isfinite(self.azimuth_halfrange_deg) or self.azimuth_halfrange_deg < 0:
            raise ValueError("azimuth_halfrange_deg must be non-negative and finite")
        steps = self.azimuth_halfrange_deg / self.azimuth_step_deg
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError(
                "azimuth_halfrange_deg must be an integer multiple of azimuth_step_deg"
            )

    @property
    def pose_count(self) -> int:
        return 2 * int(round(self.azimuth_halfrange_deg / self.azimuth_step_deg)) + 1


def look_at(eye, target, up_hint=None) -> RigidPose:
    """Build the world-to-camera pose of a camera at ``eye`` looking at ``target``.

    ``up_hint`` fixes the roll: the image "up" direction is the component of
    the hint orthogonal to the view axis.  Defaults to world +z.

    Raises:
        DegenerateLookAt: ``eye == target`` or the view direction is
            parallel to ``up_hint``.
    """
    eye = _as_vec3(eye, "eye")
    target = _as_vec3(target, "target")
    up = _as_vec3(up_hint, "up_hint") if up_hint is not None else np.array([0.0, 0.0, 1.0])

    forward = target - eye
    norm = np.linalg.norm(forward)
    if norm < _PARALLEL_EPS:
        raise DegenerateLookAt("eye and target coincide")
    z_cam = forward / norm

    up_norm = np.linalg.norm(up)
    if up_norm < _PARALLEL_EPS:
        raise DegenerateLookAt("up_hint is zero")
    up = up / up_norm

    # Camera +y is "image down": the up hint, stripped of its along-view
    # component, negated.
    y_raw = np.dot(z_cam, up) * z_cam - up
    y_norm = np.linalg.norm(y_raw)
    if y_norm < _PARALLEL_EPS:
        raise DegenerateLookAt("view direction is parallel to up_hint")
    y_cam = y_raw / y_norm
    x_cam = np.cross(y_cam, z_cam)

    rotation = np.stack([x_cam, y_cam, z_cam])
    return RigidPose(rotation, -rotation @ eye)


def _rot_z(theta_deg: float) -> NDArray[np.float64]:
    rad = math.radians(theta_deg)
    c, s = math.cos(rad), math.sin(rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def generate_rig(spec: RigSpec) -> list[tuple[float, RigidPose]]:
    """Generate the capture-rig poses, sorted by ascending azimuth.

    Every camera sits ``spec.distance_m`` from ``spec.center`` at elevation
    ``spec.elevation_deg`` above the horizontal plane through the center,
    and looks directly at the center.  At elevation 90 the up hint falls
    back to world +x (the view axis is parallel to world z there).
    """
    steps = int(round(spec.azimuth_halfrange_deg / spec.azimuth_step_deg))
    azimuths = [spec.azimuth_step_deg * k for k in range(-steps, steps + 1)]

    elev = math.radians(spec.elevation_deg)
    pole = spec.elevation_deg == 90.0
    up_hint = np.array([1.0, 0.0, 0.0]) if pole else np.array([0.0, 0.0, 1.0])

    poses = []
    for azimuth in azimuths:
        offset_dir = _rot_z(azimuth) @ np.array([0.0, 1.0, 0.0])
        eye = spec.center + spec.distance_m * (
            math.cos(elev) * offset_dir + math.sin(elev) * np.array([0.0, 0.0, 1.0])
        )
        poses.append((azimuth, look_at(eye, spec.center, up_hint)))
    return poses


def preset_rig_inference() -> tuple[tuple[float, RigidPose], ...]:
    """Return the standard four-view inference offsets.

    Each entry is ``(azimuth_offset_deg, offset_pose)`` where the offset
    pose encodes a pure rotation about the world vertical axis.  Apply an
    offset to a concrete base view with :func:`apply_view_offset`, which
    re-anchors the rotation axis at a chosen pivot point.
    """
    return tuple(
        (theta, RigidPose(_rot_z(theta), np.zeros(3)))
        for theta in INFERENCE_AZIMUTH_OFFSETS_DEG
    )


def apply_view_offset(base_pose: RigidPose, offset: RigidPose, pivot) -> RigidPose:
    """Move the camera of ``base_pose`` by a world-side rigid offset about ``pivot``.

    The offset's rotation is applied about the vertical axis through
    ``pivot`` rather than the world origin, so an offset from
    :func:`preset_rig_inference` orbits the camera around the pivot while
    keeping its distance to the pivot unchanged.
    """
    pivot = _as_vec3(pivot, "pivot")
    rot_o = offset.rotation
    shift = pivot - rot_o.T @ (pivot + offset.translation)
    rotation = base_pose.rotation @ rot_o.T
    translation = base_pose.rotation @ shift + base_pose.translation
    return RigidPose(rotation, translation)


def rotate_pose_about_vertical(pose: RigidPose, theta_deg: float, pivot) -> RigidPose:
    """Orbit the camera ``theta_deg`` about the world vertical axis through ``pivot``.

    Positive angles move the camera counterclockwise viewed from +z.  The
    camera keeps its distance to the pivot and its orientation relative to
    the orbit (the whole camera body is rotated rigidly).
    """
    return apply_view_offset(pose, RigidPose(_rot_z(theta_deg), np.zeros(3)), pivot)


def sample_virtual_view(
    depth_center,
    base_pose: RigidPose,
    magnitude_range_deg: tuple[float, float] = (20.0, 60.0),
    seed: int = 0,
) -> tuple[float, RigidPose]:
    """Draw a seeded virtual camera by orbiting the base view about ``depth_center``.

    The rotation magnitude is uniform over ``magnitude_range_deg`` and the
    sign is a fair coin flip, both drawn from a Philox stream keyed by
    ``seed`` (see module docstring for the exact draw order).  The same
    seed therefore always yields the same view.

    Returns:
        ``(theta_deg, pose)`` where ``theta_deg`` is the signed angle and
        ``pose`` is ``base_pose`` orbited by that angle about the world
        vertical axis through ``depth_center``.

    Raises:
        BadRange: the magnitude range is inverted, negative, or not finite.
    """
    lo, hi = float(magnitude_range_deg[0]), float(magnitude_range_deg[1])
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise BadRange("magnitude range must be finite")
    if lo < 0 or lo > hi:
        raise BadRange(f"magnitude range [{lo}, {hi}] is empty or negative")
    depth_center = _as_vec3(depth_center, "depth_center")

    gen = np.random.Generator(np.random.Philox(seed))
    sign = -1.0 if int(gen.integers(0, 2)) == 0 else 1.0
    magnitude = float(gen.uniform(lo, hi))
    theta = sign * magnitude
    return theta, rotate_pose_about_vertical(base_pose, theta, depth_center)


def project(points_world, intrinsics: Intrinsics, pose: RigidPose) -> NDArray[np.float64]:
    """Project world points to continuous pixel coordinates ``(u, v)``.

    Accepts a single point of shape (3,) or a batch of shape (N, 3) and
    returns matching shape (2,) or (N, 2).

    Raises:
        BehindCamera: any point has camera-space depth <= 0.
    """
    pts = np.asarray(points_world, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"points must have shape (3,) or (N, 3), got {pts.shape}")

    cam = pts @ pose.rotation.T + pose.translation
    z = cam[:, 2]
    if np.any(z <= 0):
        raise BehindCamera("point has non-positive camera-space depth")
    uv = np.empty((pts.shape[0], 2))
    uv[:, 0] = intrinsics.fx * cam[:, 0] / z + intrinsics.cx
    uv[:, 1] = intrinsics.fy * cam[:, 1] / z + intrinsics.cy
    return uv[0] if single else uv


def backproject(pixels, depth, intrinsics: Intrinsics, pose: RigidPose) -> NDArray[np.float64]:
    """Lift pixels ``(u, v)`` at camera-space depth ``depth`` to world points.

    Accepts a single pixel of shape (2,) with scalar depth, or a batch of
    shape (N, 2) with depths of shape (N,).

    Raises:
        NonPositiveDepth: any depth <= 0 or not finite.
    """
    px = np.asarray(pixels, dtype=np.float64)
    single = px.ndim == 1
    px = np.atleast_2d(px)
    if px.ndim != 2 or px.shape[1] != 2:
        raise ValueError(f"pixels must have shape (2,) or (N, 2), got {px.shape}")
    z = np.atleast_1d(np.asarray(depth, dtype=np.float64))
    if z.shape != (px.shape[0],):
        raise ValueError("depth must provide one value per pixel")
    if np.any(~np.isfinite(z)) or np.any(z <= 0):
        raise NonPositiveDepth("depth must be finite and positive")

    cam = np.empty((px.shape[0], 3))
    cam[:, 0] = (px[:, 0] - intrinsics.cx) / intrinsics.fx * z
    cam[:, 1] = (px[:, 1] - intrinsics.cy) / intrinsics.fy * z
    cam[:, 2] = z
    world = (cam - pose.translation) @ pose.rotation
    return world[0] if single else world
