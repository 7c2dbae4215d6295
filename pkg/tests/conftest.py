"""Shared synthetic scenes and on-disk fixture builders.

Module tests use small identity-camera scenes (camera at the origin
looking along +z, so depth equals the camera-frame z coordinate).  CLI
and acceptance tests build full manifest trees on disk through the
public codecs.
"""

import numpy as np
import pytest

from nvsforge import assetio
from nvsforge.camera import Intrinsics, RigidPose, RigSpec, generate_rig
from nvsforge.depthalign import DepthSequence

SMALL_W, SMALL_H = 64, 48


def textured_rgb(height, width, seed=11):
    """Deterministic non-flat texture so interpolation errors are visible."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)


def exact_inverse_pair(count, alpha=2.0, beta=0.5):
    """Metric/relative depth arrays whose inverse depths relate exactly.

    Metric depth is drawn from an exact float32 grid in [1, 1.5) so
    nothing changes when a codec narrows it, and the relative depth is
    derived so that 1/metric == alpha * (1/relative) + beta holds in
    float64 without rounding (the subtraction is exact by Sterbenz).
    """
    i = np.arange(count, dtype=np.float64)
    stride = max(1, 1048576 // count)
    metric = (1.0 + (i * stride % 1048576) / 2097152.0).astype(np.float32).astype(np.float64)
    inv_metric = 1.0 / metric
    inv_relative = (inv_metric - beta) / alpha
    return metric, 1.0 / inv_relative


@pytest.fixture
def intr():
    return Intrinsics(
        fx=70.0, fy=70.0, cx=SMALL_W / 2 - 0.5, cy=SMALL_H / 2 - 0.5,
        width=SMALL_W, height=SMALL_H,
    )


@pytest.fixture
def plane_scene(intr):
    """Fronto-parallel plane at 1.6 m seen by an identity camera."""
    rgb = textured_rgb(SMALL_H, SMALL_W)
    depth = np.full((SMALL_H, SMALL_W), 1.6, dtype=np.float64)
    return rgb, depth, intr, RigidPose.identity()


@pytest.fixture
def step_scene(intr):
    """Vertical depth step: left half at 1.2 m, right half at 2.0 m."""
    rgb = textured_rgb(SMALL_H, SMALL_W, seed=12)
    depth = np.full((SMALL_H, SMALL_W), 1.2, dtype=np.float64)
    depth[:, SMALL_W // 2 :] = 2.0
    return rgb, depth, intr, RigidPose.identity()


@pytest.fixture
def hole_scene(intr):
    """Plane with a 2x2 invalid patch; meshing must seal the rim."""
    rgb = textured_rgb(SMALL_H, SMALL_W, seed=13)
    depth = np.full((SMALL_H, SMALL_W), 1.6, dtype=np.float64)
    depth[20:22, 30:32] = np.nan
    return rgb, depth, intr, RigidPose.identity()


@pytest.fixture
def two_layer_scene():
    """16x12 scene: a near card floating over a far background layer."""
    width, height = 16, 12
    small = Intrinsics(fx=20.0, fy=20.0, cx=7.5, cy=5.5, width=width, height=height)
    rgb = textured_rgb(height, width, seed=14)
    depth = np.full((height, width), 2.0, dtype=np.float64)
    depth[3:8, 4:10] = 1.0
    return rgb, depth, small, RigidPose.identity()


def build_video_tree(
    root,
    frame_count=5,
    width=SMALL_W,
    height=SMALL_H,
    alpha=2.0,
    beta=0.5,
    pose=None,
    fx=70.0,
):
    """Write a full fixture tree: frames, relative + metric depth, manifests.

    Returns a dict of the interesting paths.  The depth pair recovers
    (alpha, beta) exactly up to the float32 codec.
    """
    intrinsics = Intrinsics(
        fx=fx, fy=fx, cx=width / 2 - 0.5, cy=height / 2 - 0.5, width=width, height=height
    )
    if pose is None:
        pose = RigidPose.identity()
    video = textured_rgb(height, width, seed=21 + frame_count)
    video = np.broadcast_to(video, (frame_count, height, width, 3)).copy()

    metric, relative = exact_inverse_pair(frame_count * height * width, alpha, beta)
    metric = metric.reshape(frame_count, height, width)
    relative = relative.reshape(frame_count, height, width)

    assetio.save_frame_sequence(root / "frames", video)
    assetio.save_depth_sequence(
        root / "depth_rel", DepthSequence.from_frames(relative, "relative")
    )
    assetio.save_depth_sequence(
        root / "depth_met", DepthSequence.from_frames(metric, "metric")
    )

    video_manifest = assetio.VideoManifest(
        frame_count=frame_count,
        resolution=(width, height),
        intrinsics=intrinsics,
        pose=pose,
        depth_pattern="depth_rel/%05d.pfm",
        depth_format=assetio.DEPTH_FORMAT_PFM,
    )
    assetio.save_video_manifest(root / "video.json", video_manifest)
    metric_manifest = assetio.VideoManifest(
        frame_count=frame_count,
        resolution=(width, height),
        intrinsics=intrinsics,
        pose=pose,
        frame_pattern=None,
        depth_pattern="depth_met/%05d.pfm",
        depth_format=assetio.DEPTH_FORMAT_PFM,
    )
    assetio.save_video_manifest(root / "metric.json", metric_manifest)
    return {
        "video": root / "video.json",
        "metric": root / "metric.json",
        "intrinsics": intrinsics,
        "pose": pose,
        "frames": video,
        "metric_depth": metric,
        "relative_depth": relative,
    }


def tabletop_depth(intrinsics, pose):
    """Camera-frame depth of the z=0 plane for every pixel of one view."""
    cols, rows = np.meshgrid(
        np.arange(intrinsics.width, dtype=np.float64),
        np.arange(intrinsics.height, dtype=np.float64),
    )
    dirs_cam = np.stack(
        [
            (cols - intrinsics.cx) / intrinsics.fx,
            (rows - intrinsics.cy) / intrinsics.fy,
            np.ones_like(cols),
        ],
        axis=-1,
    )
    dirs_world = dirs_cam @ pose.rotation  # R^T applied to each direction
    center = pose.camera_center
    return -center[2] / dirs_world[..., 2]


def build_tabletop_tree(root, frame_count=5, width=SMALL_W, height=SMALL_H, fx=70.0):
    """Fixture tree with rig geometry: a textured table plane at z=0.

    The camera is the azimuth-0 pose of the default viewing cone, so
    novel views orbit the way the production rig does.  Relative depth
    follows 1/d = alpha/d_rel + beta with (2.0, 0.25); recovery is only
    float32-exact, which is all the end-to-end flow needs.
    """
    intrinsics = Intrinsics(
        fx=fx, fy=fx, cx=width / 2 - 0.5, cy=height / 2 - 0.5, width=width, height=height
    )
    pose = dict(generate_rig(RigSpec()))[0.0]
    video = np.broadcast_to(
        textured_rgb(height, width, seed=31), (frame_count, height, width, 3)
    ).copy()

    depth = tabletop_depth(intrinsics, pose)
    metric = np.broadcast_to(depth, (frame_count, height, width)).copy()
    alpha, beta = 2.0, 0.25
    relative = 1.0 / ((1.0 / metric - beta) / alpha)

    assetio.save_frame_sequence(root / "frames", video)
    assetio.save_depth_sequence(
        root / "depth_rel", DepthSequence.from_frames(relative, "relative")
    )
    assetio.save_depth_sequence(
        root / "depth_met", DepthSequence.from_frames(metric, "metric")
    )
    video_manifest = assetio.VideoManifest(
        frame_count=frame_count,
        resolution=(width, height),
        intrinsics=intrinsics,
        pose=pose,
        depth_pattern="depth_rel/%05d.pfm",
        depth_format=assetio.DEPTH_FORMAT_PFM,
    )
    assetio.save_video_manifest(root / "video.json", video_manifest)
    metric_manifest = assetio.VideoManifest(
        frame_count=frame_count,
        resolution=(width, height),
        intrinsics=intrinsics,
        pose=pose,
        frame_pattern=None,
        depth_pattern="depth_met/%05d.pfm",
        depth_format=assetio.DEPTH_FORMAT_PFM,
    )
    assetio.save_video_manifest(root / "metric.json", metric_manifest)
    return {
        "video": root / "video.json",
        "metric": root / "metric.json",
        "intrinsics": intrinsics,
        "pose": pose,
        "frames": video,
        "metric_depth": metric,
    }
