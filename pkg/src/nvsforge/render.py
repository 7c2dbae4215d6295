"""Deterministic software z-buffer rendering of frame meshes.

This renderer defines the package's reference semantics: every output is a
pure function of its inputs, bit for bit, regardless of thread count.

Sampling model: the pixel at row ``r``, column ``c`` is sampled exactly at
continuous image coordinates ``(u, v) = (c, r)``, matching the lattice the
meshes were lifted from.  Coverage is inclusive: a sample lying exactly on
a triangle edge belongs to every triangle whose closed extent contains it,
and the winner among equal-depth candidates is the face with the lowest
index.  (Shared mesh edges interpolate identical attributes from either
side, so double coverage cannot change pixel values, while silhouette
edges keep their boundary pixels instead of dropping them.)  Projected
vertex coordinates within 1e-9 px of a pixel center snap onto it, so
lattice-aligned geometry rasterizes exactly instead of losing border
pixels to round-off.  Depth and color are interpolated
perspective-correctly, so the stored depth equals the geometric
ray-triangle intersection depth up to rounding.

Masks follow occlusion polarity everywhere in this package: 1 marks a
pixel that requires synthesis (nothing rendered there, or the nearest face
is a discontinuity wall), 0 marks trustworthy rendered content.  Masked
pixels of the color image are written as literal zeros.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from numpy.typing import NDArray

from .camera import Intrinsics, RigidPose
from .dwmesh import FACE_WALL, FrameMesh
from .errors import EmptyMesh, LengthMismatch

__all__ = [
    "RenderOutput",
    "render_novel_view",
    "render_sequence",
    "source_visibility_mask",
    "validate_occlusion_mask",
]

# Geometry closer than this to the camera plane is clipped away (meters).
_ZNEAR = 1e-6

_KIND_NONE = 255  # kind-buffer sentinel for "no face hit"


def validate_occlusion_mask(mask) -> NDArray[np.uint8]:
    """Check an occlusion mask: 2-D uint8 grid over {0, 1}."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise ValueError(f"mask must be uint8, got {arr.dtype}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("mask values must be 0 or 1")
    return arr


@dataclass(frozen=True)
class RenderOutput:
    """One rendered view of a frame mesh.

    depth_buffer holds the nearest hit depth (wall faces included) with
    +inf where no face covers the pixel.  mask is 1 exactly where the
    pixel requires synthesis (empty or nearest face is a wall); rgb is
    zero at those pixels.
    """

    rgb: NDArray[np.uint8]  # (H, W, 3)
    depth_buffer: NDArray[np.float64]  # (H, W), +inf sentinel
    mask: NDArray[np.uint8]  # (H, W), 1 = requires synthesis
    wall_hits: NDArray[np.bool_]  # (H, W), nearest face is a wall

    def __post_init__(self) -> None:
        h, w = self.depth_buffer.shape
        if self.rgb.shape != (h, w, 3) or self.rgb.dtype != np.uint8:
            raise ValueError("rgb must be (H, W, 3) uint8 matching depth_buffer")
        validate_occlusion_mask(self.mask)
        if self.mask.shape != (h, w) or self.wall_hits.shape != (h, w):
            raise ValueError("mask shapes disagree with depth_buffer")
        empty = np.isinf(self.depth_buffer)
        if not np.array_equal(self.mask == 1, empty | self.wall_hits):
            raise ValueError("mask must be 1 exactly where empty or wall-hit")
        if np.any(self.rgb[self.mask == 1] != 0):
            raise ValueError("rgb must be zero at masked pixels")
        for name in ("rgb", "depth_buffer", "mask", "wall_hits"):
            arr = getattr(self, name).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def occluded_fraction(self) -> float:
        return float(np.count_nonzero(self.mask)) / self.mask.size


@njit(cache=True)
def _raster_kernel(
    xs, ys, inv_z, color_over_z, faces, face_ids, face_kinds,
    width, height, zbuf, rgbbuf, kindbuf, fidbuf,
):  # pragma: no cover - exercised through render_novel_view
    for f in range(faces.shape[0]):
        ia, ib, ic = faces[f, 0], faces[f, 1], faces[f, 2]
        ax, ay = xs[ia], ys[ia]
        bx, by = xs[ib], ys[ib]
        cx, cy = xs[ic], ys[ic]
        area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if area == 0.0:
            continue
        if area < 0.0:
            ib, ic = ic, ib
            bx, by, cx, cy = cx, cy, bx, by
            area = -area

        lo_x = min(ax, min(bx, cx))
        hi_x = max(ax, max(bx, cx))
        lo_y = min(ay, min(by, cy))
        hi_y = max(ay, max(by, cy))
        x0 = int(np.ceil(lo_x))
        x1 = int(np.floor(hi_x))
        y0 = int(np.ceil(lo_y))
        y1 = int(np.floor(hi_y))
        if x0 < 0:
            x0 = 0
        if y0 < 0:
            y0 = 0
        if x1 > width - 1:
            x1 = width - 1
        if y1 > height - 1:
            y1 = height - 1
        if x1 < x0 or y1 < y0:
            continue

        iza, izb, izc = inv_z[ia], inv_z[ib], inv_z[ic]
        fid = face_ids[f]
        kind = face_kinds[f]
        for py in range(y0, y1 + 1):
            sy = float(py)
            for px in range(x0, x1 + 1):
                sx = float(px)
                w0 = (cx - bx) * (sy - by) - (cy - by) * (sx - bx)
                if w0 < 0.0:
                    continue
                w1 = (ax - cx) * (sy - cy) - (ay - cy) * (sx - cx)
                if w1 < 0.0:
                    continue
                w2 = (bx - ax) * (sy - ay) - (by - ay) * (sx - ax)
                if w2 < 0.0:
                    continue
                l0 = w0 / area
                l1 = w1 / area
                l2 = w2 / area
                iz = l0 * iza + l1 * izb + l2 * izc
                depth = 1.0 / iz
                zb = zbuf[py, px]
                if depth < zb or (depth == zb and fid < fidbuf[py, px]):
                    zbuf[py, px] = depth
                    fidbuf[py, px] = fid
                    kindbuf[py, px] = kind
                    rgbbuf[py, px, 0] = (
                        l0 * color_over_z[ia, 0]
                        + l1 * color_over_z[ib, 0]
                        + l2 * color_over_z[ic, 0]
                    ) * depth
                    rgbbuf[py, px, 1] = (
                        l0 * color_over_z[ia, 1]
                        + l1 * color_over_z[ib, 1]
                        + l2 * color_over_z[ic, 1]
                    ) * depth
                    rgbbuf[py, px, 2] = (
                        l0 * color_over_z[ia, 2]
                        + l1 * color_over_z[ib, 2]
                        + l2 * color_over_z[ic, 2]
                    ) * depth


def _snap_to_pixel_centers(coords, tol=1e-9):
    """Pull projected coordinates within ``tol`` of an integer onto it.

    Mesh vertices lifted from the pixel lattice reproject to their exact
    pixel centers only up to round-off; a border vertex landing at -1e-16
    would otherwise push a whole edge row outside its triangles' extent.
    """
    nearest = np.rint(coords)
    return np.where(np.abs(coords - nearest) < tol, nearest, coords)


def _clip_partial_face(pts_cam, cols):
    """Clip one camera-space triangle against z = _ZNEAR (Sutherland-Hodgman).

    Returns (points, colors) of the clipped polygon, possibly empty.
    """
    out_p = []
    out_c = []
    n = len(pts_cam)
    for k in range(n):
        p, cp = pts_cam[k], cols[k]
        q, cq = pts_cam[(k + 1) % n], cols[(k + 1) % n]
        p_in = p[2] > _ZNEAR
        q_in = q[2] > _ZNEAR
        if p_in:
            out_p.append(p)
            out_c.append(cp)
        if p_in != q_in:
            t = (_ZNEAR - p[2]) / (q[2] - p[2])
            out_p.append(p + t * (q - p))
            out_c.append(cp + t * (cq - cp))
    return out_p, out_c


def render_novel_view(
    mesh: FrameMesh, intrinsics: Intrinsics, target_pose: RigidPose
) -> RenderOutput:
    """Rasterize a frame mesh into a target view with a software z-buffer.

    Raises:
        EmptyMesh: the mesh has no faces.
    """
    if mesh.face_count == 0:
        raise EmptyMesh("mesh has no faces")
    width, height = intrinsics.width, intrinsics.height

    pos = np.where(mesh.vertex_valid[:, None], mesh.positions, 0.0)
    cam = pos @ target_pose.rotation.T + target_pose.translation
    colors = mesh.colors.astype(np.float64)

    z = cam[:, 2]
    in_front = z > _ZNEAR
    face_front = in_front[mesh.faces]
    front_count = face_front.sum(axis=1)
    full = front_count == 3
    partial = (front_count > 0) & ~full

    soup_faces = [mesh.faces[full].astype(np.int64)]
    soup_ids = [np.nonzero(full)[0].astype(np.int64)]
    soup_kinds = [mesh.face_kind[full]]

    extra_pts: list[np.ndarray] = []
    extra_cols: list[np.ndarray] = []
    if partial.any():
        clip_faces = []
        clip_ids = []
        clip_kinds = []
        base = cam.shape[0]
        for f in np.nonzero(partial)[0]:
            idx = mesh.faces[f]
            poly_p, poly_c = _clip_partial_face([cam[i] for i in idx], [colors[i] for i in idx])
            if len(poly_p) < 3:
                continue
            start = base + len(extra_pts)
            extra_pts.extend(poly_p)
            extra_cols.extend(poly_c)
            for k in range(1, len(poly_p) - 1):
                clip_faces.append((start, start + k, start + k + 1))
                clip_ids.append(f)
                clip_kinds.append(mesh.face_kind[f])
        if clip_faces:
            soup_faces.append(np.asarray(clip_faces, dtype=np.int64))
            soup_ids.append(np.asarray(clip_ids, dtype=np.int64))
            soup_kinds.append(np.asarray(clip_kinds, dtype=np.uint8))

    if extra_pts:
        cam = np.concatenate([cam, np.asarray(extra_pts)])
        colors = np.concatenate([colors, np.asarray(extra_cols)])
        z = cam[:, 2]

    faces = np.concatenate(soup_faces)
    face_ids = np.concatenate(soup_ids)
    face_kinds = np.concatenate(soup_kinds)

    zbuf = np.full((height, width), np.inf)
    rgbbuf = np.zeros((height, width, 3))
    kindbuf = np.full((height, width), _KIND_NONE, dtype=np.uint8)
    fidbuf = np.full((height, width), np.iinfo(np.int64).max, dtype=np.int64)

    if faces.size:
        safe_z = np.where(z > _ZNEAR, z, 1.0)  # only referenced where z > _ZNEAR
        xs = _snap_to_pixel_centers(intrinsics.fx * cam[:, 0] / safe_z + intrinsics.cx)
        ys = _snap_to_pixel_centers(intrinsics.fy * cam[:, 1] / safe_z + intrinsics.cy)
        inv_z = 1.0 / safe_z
        color_over_z = colors * inv_z[:, None]
        _raster_kernel(
            xs, ys, inv_z, color_over_z,
            np.ascontiguousarray(faces), face_ids, face_kinds,
            width, height, zbuf, rgbbuf, kindbuf, fidbuf,
        )

    wall_hits = kindbuf == FACE_WALL
    mask = (np.isinf(zbuf) | wall_hits).astype(np.uint8)
    rgb = np.clip(np.rint(rgbbuf), 0.0, 255.0).astype(np.uint8)
    rgb[mask == 1] = 0
    return RenderOutput(rgb=rgb, depth_buffer=zbuf, mask=mask, wall_hits=wall_hits)


def render_sequence(meshes, intrinsics: Intrinsics, trajectory) -> list[RenderOutput]:
    """Render per-frame meshes under a camera trajectory.

    ``trajectory`` is one pose (broadcast over all frames) or one pose per
    frame.

    Raises:
        LengthMismatch: trajectory length is neither 1 nor ``len(meshes)``.
    """
    meshes = list(meshes)
    if isinstance(trajectory, RigidPose):
        poses = [trajectory] * len(meshes)
    else:
        poses = list(trajectory)
        if len(poses) == 1:
            poses = poses * len(meshes)
        elif len(poses) != len(meshes):
            raise LengthMismatch(
                f"{len(poses)} poses for {len(meshes)} meshes; need 1 or equal"
            )
    return [render_novel_view(m, intrinsics, p) for m, p in zip(meshes, poses)]


def source_visibility_mask(
    mesh: FrameMesh,
    source_intrinsics: Intrinsics,
    source_pose: RigidPose,
    virtual_pose: RigidPose,
    bias: float = 1e-3,
) -> NDArray[np.uint8]:
    """Mark which source pixels stay visible from a virtual camera.

    For every source pixel carrying trustworthy surface geometry, its 3-D
    point is projected into the virtual view; the pixel is visible (0) iff
    the point lands inside the virtual frustum in front of the camera, the
    nearest face at the landing pixel (nearest sample) is a surface face,
    and the point's virtual-view depth is within a relative ``bias`` of the
    virtual depth buffer there.  Everything else, including source pixels
    that render as walls or holes in their own view, is occluded (1).

    Returns an occlusion mask at the source resolution.
    """
    if bias < 0 or not np.isfinite(bias):
        raise ValueError("bias must be non-negative and finite")
    virt = render_novel_view(mesh, source_intrinsics, virtual_pose)
    src = render_novel_view(mesh, source_intrinsics, source_pose)

    height, width = src.mask.shape
    out = np.ones((height, width), dtype=np.uint8)
    rows, cols = np.nonzero(src.mask == 0)
    if rows.size == 0:
        return out
    depth = src.depth_buffer[rows, cols]

    # Source pixel -> camera ray -> world -> virtual camera.
    x_cam = (cols.astype(np.float64) - source_intrinsics.cx) / source_intrinsics.fx * depth
    y_cam = (rows.astype(np.float64) - source_intrinsics.cy) / source_intrinsics.fy * depth
    pts_src = np.stack([x_cam, y_cam, depth], axis=1)
    world = (pts_src - source_pose.translation) @ source_pose.rotation
    pts_virt = world @ virtual_pose.rotation.T + virtual_pose.translation
    zv = pts_virt[:, 2]

    in_front = zv > _ZNEAR
    u = np.zeros_like(zv)
    v = np.zeros_like(zv)
    u[in_front] = (
        source_intrinsics.fx * pts_virt[in_front, 0] / zv[in_front] + source_intrinsics.cx
    )
    v[in_front] = (
        source_intrinsics.fy * pts_virt[in_front, 1] / zv[in_front] + source_intrinsics.cy
    )
    lu = np.rint(u).astype(np.int64)
    lv = np.rint(v).astype(np.int64)
    in_bounds = in_front & (lu >= 0) & (lu < width) & (lv >= 0) & (lv < height)

    visible = np.zeros(rows.size, dtype=bool)
    idx = np.nonzero(in_bounds)[0]
    landing_mask = virt.mask[lv[idx], lu[idx]]
    landing_depth = virt.depth_buffer[lv[idx], lu[idx]]
    visible[idx] = (landing_mask == 0) & (zv[idx] <= landing_depth * (1.0 + bias))

    out[rows[visible], cols[visible]] = 0
    return out
