"""Watertight per-frame depth meshes with discontinuity walls.

A depth frame is lifted to a triangle mesh over a (possibly strided) pixel
lattice.  Lattice cells whose four corners are valid always emit two
triangles split along the fixed top-left to bottom-right diagonal; a cell
is classified *surface* when its four edge-adjacent inverse-depth jumps
stay within a threshold and *wall* otherwise, so depth discontinuities
stay sealed by geometry that a renderer can recognize and mask out.
Regions of invalid depth leave no dangling boundary either: each hole is
capped with wall triangles spanned by its rim vertices.

The jump threshold is ``discontinuity_tau`` times the median inverse depth
of the valid lattice pixels of the frame.

Face kinds are :data:`FACE_SURFACE` (0) and :data:`FACE_WALL` (1).
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .camera import Intrinsics, RigidPose, backproject
from .errors import NoValidGeometry, ShapeMismatch, TooSmall

__all__ = [
    "FACE_SURFACE",
    "FACE_WALL",
    "MeshConfig",
    "FrameMesh",
    "build_frame_mesh",
    "watertightness_report",
    "export_obj",
]

FACE_SURFACE = 0
FACE_WALL = 1


@dataclass(frozen=True)
class MeshConfig:
    """Tuning knobs for mesh construction."""

    discontinuity_tau: float = 0.1  # jump threshold, fraction of median inverse depth
    grid_stride: int = 1  # lattice spacing in pixels

    def __post_init__(self) -> None:
        if not np.isfinite(self.discontinuity_tau) or self.discontinuity_tau <= 0:
            raise ValueError("discontinuity_tau must be positive and finite")
        if int(self.grid_stride) != self.grid_stride or self.grid_stride < 1:
            raise ValueError("grid_stride must be an integer >= 1")


@dataclass(frozen=True)
class FrameMesh:
    """Triangle mesh of one frame in world coordinates.

    Vertices cover every lattice point of the strided pixel grid so faces
    can index the lattice directly; lattice points with invalid depth are
    retained as placeholders (``vertex_valid`` False, position NaN) and are
    never referenced by any face.
    """

    positions: NDArray[np.float64]  # (V, 3) world points, NaN at invalid vertices
    colors: NDArray[np.uint8]  # (V, 3) source colors
    source_uv: NDArray[np.float64]  # (V, 2) source pixel (u, v) per vertex
    vertex_valid: NDArray[np.bool_]  # (V,)
    faces: NDArray[np.int32]  # (F, 3) vertex indices
    face_kind: NDArray[np.uint8]  # (F,) FACE_SURFACE or FACE_WALL
    source_resolution: tuple[int, int]  # (height, width) of the source frame
    grid_shape: tuple[int, int]  # (rows, cols) of the vertex lattice
    grid_stride: int

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=np.float64)
        col = np.asarray(self.colors, dtype=np.uint8)
        uv = np.asarray(self.source_uv, dtype=np.float64)
        valid = np.asarray(self.vertex_valid, dtype=bool)
        faces = np.asarray(self.faces, dtype=np.int32).reshape(-1, 3)
        kind = np.asarray(self.face_kind, dtype=np.uint8).reshape(-1)

        v = pos.shape[0]
        if pos.shape != (v, 3) or col.shape != (v, 3) or uv.shape != (v, 2) or valid.shape != (v,):
            raise ValueError("vertex arrays disagree in length or shape")
        if kind.shape[0] != faces.shape[0]:
            raise ValueError("face_kind length differs from face count")
        if faces.size:
            if faces.min() < 0 or faces.max() >= v:
                raise ValueError("face index out of range")
            if np.any(faces[:, 0] == faces[:, 1]) or np.any(faces[:, 1] == faces[:, 2]) or np.any(
                faces[:, 0] == faces[:, 2]
            ):
                raise ValueError("face references a vertex twice")
            if not np.all(valid[faces]):
                raise ValueError("face references an invalid vertex")
        if not np.all(np.isin(kind, (FACE_SURFACE, FACE_WALL))):
            raise ValueError("unknown face kind")
        if valid.any() and not np.all(np.isfinite(pos[valid])):
            raise ValueError("valid vertex with non-finite position")

        for name, arr in (
            ("positions", pos),
            ("colors", col),
            ("source_uv", uv),
            ("vertex_valid", valid),
            ("faces", faces),
            ("face_kind", kind),
        ):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "source_resolution", tuple(int(x) for x in self.source_resolution))
        object.__setattr__(self, "grid_shape", tuple(int(x) for x in self.grid_shape))

    @property
    def face_count(self) -> int:
        return self.faces.shape[0]

    @property
    def vertex_count(self) -> int:
        return self.positions.shape[0]


def build_frame_mesh(
    rgb,
    depth,
    intrinsics: Intrinsics,
    pose: RigidPose,
    config: MeshConfig | None = None,
) -> FrameMesh:
    """Lift one RGB-D frame to a watertight world-space triangle mesh.

    Args:
        rgb: (H, W, 3) uint8 frame.
        depth: (H, W) depth in meters; non-finite or <= 0 marks invalid.
        intrinsics: pinhole intrinsics matching the frame resolution.
        pose: world-to-camera pose of the source view.
        config: threshold and stride; defaults to ``MeshConfig()``.

    Raises:
        TooSmall: the strided lattice is smaller than 2x2.
        NoValidGeometry: no lattice cell has four valid corners.
    """
    config = config or MeshConfig()
    rgb = np.asarray(rgb)
    depth = np.asarray(depth, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ValueError("rgb must be (H, W, 3) uint8")
    if depth.shape != rgb.shape[:2]:
        raise ShapeMismatch(f"depth shape {depth.shape} != rgb shape {rgb.shape[:2]}")
    height, width = depth.shape
    if (width, height) != (intrinsics.width, intrinsics.height):
        raise ShapeMismatch("frame resolution disagrees with intrinsics")

    stride = int(config.grid_stride)
    row_px = np.arange(0, height, stride)
    col_px = np.arange(0, width, stride)
    n_rows, n_cols = len(row_px), len(col_px)
    if n_rows < 2 or n_cols < 2:
        raise TooSmall(f"strided lattice is {n_rows}x{n_cols}; need at least 2x2")

    d = depth[np.ix_(row_px, col_px)]
    valid = np.isfinite(d) & (d > 0)

    # Cell classification: a cell exists when all four corners are valid.
    v00 = valid[:-1, :-1]
    v01 = valid[:-1, 1:]
    v10 = valid[1:, :-1]
    v11 = valid[1:, 1:]
    cell_full = v00 & v01 & v10 & v11
    if not cell_full.any():
        raise NoValidGeometry("no lattice cell has four valid corners")

    inv = np.zeros_like(d)
    inv[valid] = 1.0 / d[valid]
    threshold = config.discontinuity_tau * float(np.median(inv[valid]))
    jump = np.maximum.reduce(
        [
            np.abs(inv[:-1, :-1] - inv[:-1, 1:]),  # top edge
            np.abs(inv[1:, :-1] - inv[1:, 1:]),  # bottom edge
            np.abs(inv[:-1, :-1] - inv[1:, :-1]),  # left edge
            np.abs(inv[:-1, 1:] - inv[1:, 1:]),  # right edge
        ]
    )
    cell_wall = cell_full & (jump > threshold)

    # Vertices: every lattice point, placeholders where invalid.
    uu, vv = np.meshgrid(col_px.astype(np.float64), row_px.astype(np.float64))
    source_uv = np.stack([uu.ravel(), vv.ravel()], axis=1)
    positions = np.full((n_rows * n_cols, 3), np.nan)
    flat_valid = valid.ravel()
    if flat_valid.any():
        positions[flat_valid] = backproject(
            source_uv[flat_valid], d.ravel()[flat_valid], intrinsics, pose
        )
    colors = rgb[np.ix_(row_px, col_px)].reshape(-1, 3)

    # Filled cells emit two triangles along the TL-BR diagonal, row-major.
    cell_rows, cell_cols = np.nonzero(cell_full)
    tl = (cell_rows * n_cols + cell_cols).astype(np.int32)
    tr = tl + 1
    bl = tl + n_cols
    br = bl + 1
    quad_faces = np.empty((tl.size * 2, 3), dtype=np.int32)
    quad_faces[0::2] = np.stack([tl, tr, br], axis=1)
    quad_faces[1::2] = np.stack([tl, br, bl], axis=1)
    quad_kind = np.repeat(
        np.where(cell_wall[cell_rows, cell_cols], FACE_WALL, FACE_SURFACE).astype(np.uint8), 2
    )

    hole_cells = ~cell_full
    if hole_cells.any():
        cap_faces = _cap_holes(hole_cells, flat_valid, n_rows, n_cols)
    else:
        cap_faces = np.empty((0, 3), dtype=np.int32)

    faces = np.concatenate([quad_faces, cap_faces])
    face_kind = np.concatenate(
        [quad_kind, np.full(cap_faces.shape[0], FACE_WALL, dtype=np.uint8)]
    )
    return FrameMesh(
        positions=positions,
        colors=colors,
        source_uv=source_uv,
        vertex_valid=flat_valid,
        faces=faces,
        face_kind=face_kind,
        source_resolution=(height, width),
        grid_shape=(n_rows, n_cols),
        grid_stride=stride,
    )


# --- hole sealing ----------------------------------------------------------
#
# Unfilled cells (any invalid corner) are grouped into 4-connected
# components.  Each component boundary is walked into closed loops of
# directed lattice edges with the hole kept on the walker's right; invalid
# vertices (which can only appear on the image border) are dropped from a
# loop, shorting the path with a chord between border vertices.  Island
# loops are merged into their component's outer loop with a keyhole bridge
# and each resulting polygon is ear-clipped into wall triangles.


def _cap_holes(hole_cells, vertex_valid, n_rows, n_cols):
    labels = _label_components(hole_cells)
    tris: list[tuple[int, int, int]] = []
    for component in range(1, labels.max() + 1):
        cells = np.argwhere(labels == component)
        loops = _boundary_loops(cells)
        polys = []
        for loop in loops:
            kept = [(i, j) for (i, j) in loop if vertex_valid[i * n_cols + j]]
            if len(kept) >= 3:
                polys.append(kept)
        if not polys:
            continue
        merged = _merge_loops(polys)
        for a, b, c in _ear_clip(merged):
            ia = a[0] * n_cols + a[1]
            ib = b[0] * n_cols + b[1]
            ic = c[0] * n_cols + c[1]
            if ia != ib and ib != ic and ia != ic:
                tris.append((ia, ib, ic))
    if not tris:
        return np.empty((0, 3), dtype=np.int32)
    return np.asarray(tris, dtype=np.int32)


def _label_components(mask):
    """4-connected component labels of True cells, 1-based, deterministic."""
    labels = np.zeros(mask.shape, dtype=np.int32)
    current = 0
    rows, cols = mask.shape
    for start in zip(*np.nonzero(mask)):
        if labels[start]:
            continue
        current += 1
        stack = [start]
        labels[start] = current
        while stack:
            r, c = stack.pop()
            for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= nr < rows and 0 <= nc < cols and mask[nr, nc] and not labels[nr, nc]:
                    labels[nr, nc] = current
                    stack.append((nr, nc))
    return labels


def _boundary_loops(cells):
    """Closed vertex loops bounding a set of lattice cells.

    Cells are (row, col) lattice cells; loop vertices are (row, col)
    lattice points.  Edges shared by two cells cancel; the survivors are
    walked into loops, preferring the sharpest right turn at pinch points
    so the region stays on the walker's right.
    """
    directed: set[tuple[tuple[int, int], tuple[int, int]]] = set()
    for r, c in cells:
        corners = ((r, c), (r, c + 1), (r + 1, c + 1), (r + 1, c))  # TL TR BR BL
        for k in range(4):
            a, b = corners[k], corners[(k + 1) % 4]
            if (b, a) in directed:
                directed.remove((b, a))
            else:
                directed.add((a, b))

    outgoing = defaultdict(list)
    for a, b in directed:
        outgoing[a].append(b)

    remaining = set(directed)
    loops = []
    for start in sorted(remaining):
        if start not in remaining:
            continue
        a, b = start
        loop = [a]
        edge = start
        while True:
            remaining.discard(edge)
            a, b = edge
            loop.append(b)
            if b == start[0]:
                break
            d = (b[0] - a[0], b[1] - a[1])
            # With the region on the right, prefer right turn, then
            # straight, then left.  (dy, dx) rotations in lattice coords.
            preferences = (
                (d[1], -d[0]),  # right turn
                d,  # straight
                (-d[1], d[0]),  # left turn
            )
            nxt = None
            for dv in preferences:
                cand = (b[0] + dv[0], b[1] + dv[1])
                if (b, cand) in remaining:
                    nxt = (b, cand)
                    break
            if nxt is None:
                break  # open chain (cannot happen for a closed complex)
            edge = nxt
        if len(loop) >= 4 and loop[0] == loop[-1]:
            loops.append(loop[:-1])
    return loops


def _merge_loops(polys):
    """Merge island loops into the largest loop with keyhole bridges."""
    if len(polys) == 1:
        return list(polys[0])

    def area(poly):
        s = 0.0
        for k in range(len(poly)):
            (r0, c0), (r1, c1) = poly[k], poly[(k + 1) % len(poly)]
            s += c0 * r1 - c1 * r0
        return abs(s) / 2.0

    polys = sorted(polys, key=area, reverse=True)
    merged = list(polys[0])
    for inner in polys[1:]:
        best = None
        for qi, q in enumerate(merged):
            for pi, p in enumerate(inner):
                d2 = (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2
                if best is None or d2 < best[0]:
                    best = (d2, qi, pi)
        _, qi, pi = best
        bridge = inner[pi:] + inner[:pi]
        merged = merged[: qi + 1] + bridge + [inner[pi], merged[qi]] + merged[qi + 1 :]
    return merged


def _ear_clip(poly):
    """Triangulate a simple polygon of (row, col) lattice points.

    Falls back to a fan if no ear is found; the fan preserves the edge
    multiset (every polygon edge once, diagonals twice) even when its
    geometry degenerates, which is what the watertightness accounting
    needs.
    """
    pts = [(float(c), float(r)) for (r, c) in poly]  # (x, y)
    n = len(pts)
    if n < 3:
        return []
    # Orient counterclockwise by shoelace so ear tests are one-sided.
    signed = sum(
        pts[k][0] * pts[(k + 1) % n][1] - pts[(k + 1) % n][0] * pts[k][1] for k in range(n)
    )
    order = list(range(n))
    if signed < 0:
        order.reverse()

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def strictly_inside(p, a, b, c):
        d1 = cross(a, b, p)
        d2 = cross(b, c, p)
        d3 = cross(c, a, p)
        return d1 > 1e-12 and d2 > 1e-12 and d3 > 1e-12

    tris = []
    while len(order) > 3:
        clipped = False
        for k in range(len(order)):
            ip = order[k - 1]
            ic = order[k]
            it = order[(k + 1) % len(order)]
            a, b, c = pts[ip], pts[ic], pts[it]
            if cross(a, b, c) <= 1e-12:
                continue
            blocked = False
            for m in order:
                if m in (ip, ic, it):
                    continue
                p = pts[m]
                if p == a or p == b or p == c:
                    continue
                if strictly_inside(p, a, b, c):
                    blocked = True
                    break
            if not blocked:
                tris.append((poly[ip], poly[ic], poly[it]))
                order.pop(k)
                clipped = True
                break
        if not clipped:
            anchor = order[0]
            for k in range(1, len(order) - 1):
                tris.append((poly[anchor], poly[order[k]], poly[order[k + 1]]))
            return tris
    tris.append((poly[order[0]], poly[order[1]], poly[order[2]]))
    return tris


# --- diagnostics -----------------------------------------------------------


def watertightness_report(mesh: FrameMesh) -> dict:
    """Count topological defects of a frame mesh.

    Returns a mapping with:

    * ``non_manifold_edges``: edges shared by three or more faces.
    * ``open_edges``: edges used by exactly one face whose endpoints are
      not both on the outer ring of the vertex lattice (the image border
      is allowed to stay open).
    * ``face_counts``: faces per kind, keys ``surface`` and ``wall``.
    """
    faces = mesh.faces
    if faces.size == 0:
        return {
            "non_manifold_edges": 0,
            "open_edges": 0,
            "face_counts": {"surface": 0, "wall": 0},
        }
    edges = np.concatenate([faces[:, (0, 1)], faces[:, (1, 2)], faces[:, (0, 2)]])
    edges = np.sort(edges, axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)

    n_rows, n_cols = mesh.grid_shape
    rows = uniq // n_cols
    cols = uniq % n_cols
    on_ring = (rows == 0) | (rows == n_rows - 1) | (cols == 0) | (cols == n_cols - 1)
    border_edge = on_ring.all(axis=1)

    open_edges = int(np.count_nonzero((counts == 1) & ~border_edge))
    non_manifold = int(np.count_nonzero(counts >= 3))
    return {
        "non_manifold_edges": non_manifold,
        "open_edges": open_edges,
        "face_counts": {
            "surface": int(np.count_nonzero(mesh.face_kind == FACE_SURFACE)),
            "wall": int(np.count_nonzero(mesh.face_kind == FACE_WALL)),
        },
    }


def export_obj(mesh: FrameMesh) -> str:
    """Serialize a mesh as ASCII OBJ text with per-face kind comments.

    Invalid placeholder vertices are written as the origin so indices stay
    lattice-aligned; no face references them.  Debugging aid only.
    """
    lines = ["# nvsforge frame mesh"]
    for k in range(mesh.vertex_count):
        if mesh.vertex_valid[k]:
            x, y, z = mesh.positions[k]
            lines.append(f"v {x!r} {y!r} {z!r}")
        else:
            lines.append("v 0 0 0")
    for k in range(mesh.face_count):
        a, b, c = (int(i) + 1 for i in mesh.faces[k])
        kind = "surface" if mesh.face_kind[k] == FACE_SURFACE else "wall"
        lines.append(f"f {a} {b} {c} # {kind}")
    return "\n".join(lines) + "\n"
