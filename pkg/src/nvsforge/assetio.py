"""Bit-exact persistence for frames, depth, masks, rigs, and bundles.

Layout conventions:

* Frame-sequence files are numbered with zero-padded five-digit indices
  starting at 00000 (pattern ``%05d``), e.g. ``frames/00000.png``.
* RGB frames are 8-bit RGB PNG.  Masks are 8-bit grayscale PNG storing
  0 = visible and 255 = occluded; any nonzero value loads as occluded.
* Depth supports two codecs: ``pfm-float`` (canonical: little-endian
  float32 PFM, lossless for float32 payloads) and ``png16-millimeters``
  (16-bit grayscale PNG of integer millimeters where 0 marks an invalid
  pixel).
* Manifests are JSON with a ``schema_version`` field; asset paths inside a
  manifest are relative to the manifest's directory.  Rig and alignment
  records are line-oriented text with full decimal precision (``repr``)
  so reloading reproduces every float64 bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from numpy.typing import NDArray

from .camera import Intrinsics, RigidPose
from .depthalign import AlignmentParams, DepthSequence
from .errors import (
    DecodeError,
    ManifestError,
    MissingFrame,
    ResolutionMismatch,
    UnsupportedFormat,
    WriteError,
)
from .pairs import ConditioningBundle, TrainingPair

__all__ = [
    "FRAME_PATTERN",
    "DEPTH_FORMAT_PFM",
    "DEPTH_FORMAT_PNG16",
    "VideoManifest",
    "save_frame_sequence",
    "load_frame_sequence",
    "save_mask_sequence",
    "load_mask_sequence",
    "save_depth_sequence",
    "load_depth_sequence",
    "save_video_manifest",
    "load_video_manifest",
    "save_rig",
    "load_rig",
    "save_alignment",
    "load_alignment",
    "write_bundle",
    "load_bundle",
    "write_training_pair",
    "load_training_pair",
]

SCHEMA_VERSION = 1
FRAME_PATTERN = "%05d.png"
DEPTH_FORMAT_PFM = "pfm-float"
DEPTH_FORMAT_PNG16 = "png16-millimeters"
_DEPTH_FORMATS = (DEPTH_FORMAT_PFM, DEPTH_FORMAT_PNG16)

RIG_KIND_ABSOLUTE = "absolute"
RIG_KIND_OFFSET = "offset"


def _frame_path(root: Path, pattern: str, index: int) -> Path:
    try:
        rel = pattern % index
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"bad frame pattern {pattern!r}: {exc}") from None
    return root / rel


def _open_image(path: Path) -> Image.Image:
    if not path.exists():
        raise MissingFrame(f"missing file: {path}")
    try:
        img = Image.open(path)
        img.load()
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from None
    return img


# --- RGB frames -------------------------------------------------------------


def save_frame_sequence(directory, video, pattern: str = FRAME_PATTERN) -> int:
    """Write a (T, H, W, 3) uint8 video as numbered RGB PNGs; returns T."""
    video = np.asarray(video)
    if video.ndim != 4 or video.shape[3] != 3 or video.dtype != np.uint8:
        raise ValueError("video must be (T, H, W, 3) uint8")
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    try:
        for t in range(video.shape[0]):
            Image.fromarray(video[t], "RGB").save(_frame_path(root, pattern, t), format="PNG")
    except OSError as exc:
        raise WriteError(f"cannot write frame sequence under {root}: {exc}") from None
    return int(video.shape[0])


def load_frame_sequence(
    directory, frame_count: int, pattern: str = FRAME_PATTERN, resolution=None
) -> NDArray[np.uint8]:
    """Load numbered RGB PNGs into a (T, H, W, 3) uint8 video.

    ``resolution`` is (width, height); when given, every frame must match.
    """
    root = Path(directory)
    frames = []
    for t in range(frame_count):
        img = _open_image(_frame_path(root, pattern, t))
        if img.mode != "RGB":
            raise DecodeError(f"{_frame_path(root, pattern, t)}: expected RGB, got {img.mode}")
        arr = np.asarray(img, dtype=np.uint8)
        if resolution is not None and (img.width, img.height) != tuple(resolution):
            raise ResolutionMismatch(
                f"frame {t} is {img.width}x{img.height}, expected {resolution[0]}x{resolution[1]}"
            )
        frames.append(arr)
    video = np.stack(frames)
    if len({f.shape for f in frames}) != 1:
        raise ResolutionMismatch("frames disagree in resolution")
    return video


# --- masks ------------------------------------------------------------------


def save_mask_sequence(directory, masks, pattern: str = FRAME_PATTERN) -> int:
    """Write (T, H, W) {0,1} masks as 8-bit grayscale PNGs (0 / 255)."""
    masks = np.asarray(masks)
    if masks.ndim != 3 or masks.dtype != np.uint8 or not np.all((masks == 0) | (masks == 1)):
        raise ValueError("masks must be (T, H, W) uint8 over {0, 1}")
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    try:
        for t in range(masks.shape[0]):
            Image.fromarray(masks[t] * np.uint8(255), "L").save(
                _frame_path(root, pattern, t), format="PNG"
            )
    except OSError as exc:
        raise WriteError(f"cannot write mask sequence under {root}: {exc}") from None
    return int(masks.shape[0])


def load_mask_sequence(
    directory, frame_count: int, pattern: str = FRAME_PATTERN, resolution=None
) -> NDArray[np.uint8]:
    """Load grayscale PNG masks; any nonzero pixel counts as occluded (1)."""
    root = Path(directory)
    out = []
    for t in range(frame_count):
        path = _frame_path(root, pattern, t)
        img = _open_image(path)
        if img.mode != "L":
            raise DecodeError(f"{path}: expected 8-bit grayscale, got {img.mode}")
        if resolution is not None and (img.width, img.height) != tuple(resolution):
            raise ResolutionMismatch(
                f"mask {t} is {img.width}x{img.height}, expected {resolution[0]}x{resolution[1]}"
            )
        out.append((np.asarray(img) != 0).astype(np.uint8))
    masks = np.stack(out)
    return masks


# --- depth ------------------------------------------------------------------


def _write_pfm(path: Path, data: NDArray[np.float32]) -> None:
    # Grayscale PFM, negative scale = little endian, rows bottom to top.
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{data.shape[1]} {data.shape[0]}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(np.ascontiguousarray(data[::-1]).astype("<f4").tobytes())


def _read_pfm(path: Path) -> NDArray[np.float32]:
    with open(path, "rb") as fh:
        blob = fh.read()
    try:
        parts = blob.split(b"\n", 3)
        if len(parts) < 4 or parts[0].strip() != b"Pf":
            raise ValueError("not a grayscale PFM")
        width, height = (int(x) for x in parts[1].split())
        scale = float(parts[2])
        payload = parts[3]
        dtype = "<f4" if scale < 0 else ">f4"
        expected = width * height * 4
        if len(payload) < expected:
            raise ValueError("truncated payload")
        data = np.frombuffer(payload[:expected], dtype=dtype).reshape(height, width)
    except (ValueError, IndexError) as exc:
        raise DecodeError(f"cannot decode PFM {path}: {exc}") from None
    return np.ascontiguousarray(data[::-1]).astype(np.float32)


def save_depth_sequence(
    directory,
    depth: DepthSequence,
    depth_format: str = DEPTH_FORMAT_PFM,
    pattern: str | None = None,
) -> int:
    """Write a depth sequence with the chosen codec; returns frame count.

    ``pfm-float`` stores the float32 payload losslessly with invalid
    pixels as 0.  ``png16-millimeters`` stores rounded integer
    millimeters, 0 marking invalid; depths at or beyond 65.535 m do not
    fit and raise WriteError.
    """
    if depth_format not in _DEPTH_FORMATS:
        raise UnsupportedFormat(f"unknown depth format {depth_format!r}")
    if pattern is None:
        pattern = "%05d.pfm" if depth_format == DEPTH_FORMAT_PFM else FRAME_PATTERN
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    try:
        for t in range(depth.frame_count):
            path = _frame_path(root, pattern, t)
            if depth_format == DEPTH_FORMAT_PFM:
                _write_pfm(path, depth.frames[t])
            else:
                mm = np.rint(depth.frames[t].astype(np.float64) * 1000.0)
                mm[~depth.validity[t]] = 0.0
                if mm.max(initial=0.0) > 65535.0:
                    raise WriteError(
                        f"frame {t}: depth exceeds 65.535 m, not representable in 16-bit mm"
                    )
                # A valid sub-millimeter depth would collapse onto the
                # invalid sentinel; refuse rather than corrupt.
                if np.any((mm == 0.0) & depth.validity[t]):
                    raise WriteError(f"frame {t}: valid depth below 0.5 mm maps to 0")
                Image.fromarray(mm.astype(np.uint16)).save(path, format="PNG")
    except OSError as exc:
        raise WriteError(f"cannot write depth sequence under {root}: {exc}") from None
    return depth.frame_count


def load_depth_sequence(
    directory,
    frame_count: int,
    depth_format: str = DEPTH_FORMAT_PFM,
    pattern: str | None = None,
    kind: str = "metric",
    resolution=None,
) -> DepthSequence:
    """Load a depth sequence written by :func:`save_depth_sequence`."""
    if depth_format not in _DEPTH_FORMATS:
        raise UnsupportedFormat(f"unknown depth format {depth_format!r}")
    if pattern is None:
        pattern = "%05d.pfm" if depth_format == DEPTH_FORMAT_PFM else FRAME_PATTERN
    root = Path(directory)
    frames = []
    for t in range(frame_count):
        path = _frame_path(root, pattern, t)
        if depth_format == DEPTH_FORMAT_PFM:
            if not path.exists():
                raise MissingFrame(f"missing file: {path}")
            arr = _read_pfm(path)
        else:
            img = _open_image(path)
            if img.mode not in ("I;16", "I"):
                raise DecodeError(f"{path}: expected 16-bit grayscale, got {img.mode}")
            raw = np.asarray(img, dtype=np.float64)
            arr = (raw / 1000.0).astype(np.float32)
        if resolution is not None and (arr.shape[1], arr.shape[0]) != tuple(resolution):
            raise ResolutionMismatch(
                f"depth frame {t} is {arr.shape[1]}x{arr.shape[0]}, expected "
                f"{resolution[0]}x{resolution[1]}"
            )
        frames.append(arr)
    stacked = np.stack(frames)
    validity = np.isfinite(stacked) & (stacked > 0)
    return DepthSequence(stacked, validity, kind)


# --- manifests --------------------------------------------------------------


@dataclass(frozen=True)
class VideoManifest:
    """Description of one on-disk video (frames plus optional depth/masks).

    ``frame_pattern`` may be None for a depth-only sequence (e.g. the
    output of alignment); at least one of frames and depth must be
    present.
    """

    frame_count: int
    resolution: tuple[int, int]  # (width, height)
    intrinsics: Intrinsics
    pose: RigidPose
    frame_pattern: str | None = "frames/" + FRAME_PATTERN
    depth_pattern: str | None = None
    depth_format: str | None = None
    mask_pattern: str | None = None
    prompt: str | None = None

    def __post_init__(self) -> None:
        if self.frame_count < 1:
            raise ManifestError("frame_count must be >= 1")
        w, h = self.resolution
        if w < 1 or h < 1:
            raise ManifestError("resolution must be positive")
        if (w, h) != (self.intrinsics.width, self.intrinsics.height):
            raise ManifestError("resolution disagrees with intrinsics")
        if self.frame_pattern is None and self.depth_pattern is None:
            raise ManifestError("manifest needs frames or depth")
        if (self.depth_pattern is None) != (self.depth_format is None):
            raise ManifestError("depth_pattern and depth_format go together")
        if self.depth_format is not None and self.depth_format not in _DEPTH_FORMATS:
            raise UnsupportedFormat(f"unknown depth format {self.depth_format!r}")
        object.__setattr__(self, "resolution", (int(w), int(h)))


def _intrinsics_to_dict(intr: Intrinsics) -> dict:
    return {
        "fx": intr.fx,
        "fy": intr.fy,
        "cx": intr.cx,
        "cy": intr.cy,
        "width": intr.width,
        "height": intr.height,
    }


def _pose_to_dict(pose: RigidPose) -> dict:
    return {
        "rotation": [[float(x) for x in row] for row in pose.rotation],
        "translation": [float(x) for x in pose.translation],
    }


def _write_json(path: Path, payload: dict) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise WriteError(f"cannot write {path}: {exc}") from None


def _read_json(path: Path, expected_kind: str) -> dict:
    if not path.exists():
        raise ManifestError(f"missing manifest: {path}")
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read {path}: {exc}") from None
    if not isinstance(payload, dict):
        raise ManifestError(f"{path}: manifest must be a JSON object")
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise UnsupportedFormat(
            f"{path}: unsupported schema_version {payload.get('schema_version')!r}"
        )
    if payload.get("kind") != expected_kind:
        raise ManifestError(f"{path}: expected kind {expected_kind!r}, got {payload.get('kind')!r}")
    return payload


def save_video_manifest(path, manifest: VideoManifest) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "kind": "video",
        "frame_count": manifest.frame_count,
        "resolution": list(manifest.resolution),
        "frame_pattern": manifest.frame_pattern,
        "depth_pattern": manifest.depth_pattern,
        "depth_format": manifest.depth_format,
        "mask_pattern": manifest.mask_pattern,
        "prompt": manifest.prompt,
        "intrinsics": _intrinsics_to_dict(manifest.intrinsics),
        "pose": _pose_to_dict(manifest.pose),
    }
    _write_json(Path(path), payload)


def load_video_manifest(path) -> VideoManifest:
    path = Path(path)
    payload = _read_json(path, "video")
    try:
        intr = Intrinsics(**payload["intrinsics"])
        pose = RigidPose(
            np.asarray(payload["pose"]["rotation"], dtype=np.float64),
            np.asarray(payload["pose"]["translation"], dtype=np.float64),
        )
        pattern = payload["frame_pattern"]
        return VideoManifest(
            frame_count=int(payload["frame_count"]),
            resolution=tuple(payload["resolution"]),
            intrinsics=intr,
            pose=pose,
            frame_pattern=None if pattern is None else str(pattern),
            depth_pattern=payload.get("depth_pattern"),
            depth_format=payload.get("depth_format"),
            mask_pattern=payload.get("mask_pattern"),
            prompt=payload.get("prompt"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (UnsupportedFormat, ManifestError)):
            raise
        raise ManifestError(f"{path}: malformed manifest: {exc}") from None


# --- rigs -------------------------------------------------------------------


def save_rig(path, entries, kind: str = RIG_KIND_ABSOLUTE) -> None:
    """Write rig poses as text: one record of azimuth + R (row-major) + t.

    Floats are written with ``repr`` so loading restores them bit-exactly.
    ``kind`` distinguishes absolute world poses from view offsets.
    """
    if kind not in (RIG_KIND_ABSOLUTE, RIG_KIND_OFFSET):
        raise ValueError(f"unknown rig kind {kind!r}")
    entries = list(entries)
    lines = [f"nvsforge-rig {SCHEMA_VERSION} {kind} {len(entries)}"]
    for azimuth, pose in entries:
        values = [float(azimuth), *pose.rotation.ravel(), *pose.translation]
        lines.append(" ".join(repr(float(v)) for v in values))
    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise WriteError(f"cannot write rig {path}: {exc}") from None


def load_rig(path) -> tuple[str, list[tuple[float, RigidPose]]]:
    """Load a rig file; returns (kind, [(azimuth_deg, pose), ...])."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"missing rig file: {path}")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise DecodeError(f"{path}: empty rig file")
    header = lines[0].split()
    if len(header) != 4 or header[0] != "nvsforge-rig":
        raise DecodeError(f"{path}: bad rig header {lines[0]!r}")
    if int(header[1]) != SCHEMA_VERSION:
        raise UnsupportedFormat(f"{path}: unsupported rig version {header[1]}")
    kind = header[2]
    if kind not in (RIG_KIND_ABSOLUTE, RIG_KIND_OFFSET):
        raise DecodeError(f"{path}: unknown rig kind {kind!r}")
    count = int(header[3])
    records = lines[1:]
    if len(records) != count:
        raise DecodeError(f"{path}: header promises {count} records, found {len(records)}")
    entries = []
    for ln in records:
        try:
            values = [float(tok) for tok in ln.split()]
        except ValueError as exc:
            raise DecodeError(f"{path}: bad rig record {ln!r}: {exc}") from None
        if len(values) != 13:
            raise DecodeError(f"{path}: rig record needs 13 numbers, got {len(values)}")
        rotation = np.asarray(values[1:10]).reshape(3, 3)
        translation = np.asarray(values[10:13])
        entries.append((values[0], RigidPose(rotation, translation)))
    return kind, entries


# --- alignment records ------------------------------------------------------


def save_alignment(path, params: AlignmentParams) -> None:
    """Write alignment parameters as a small human-readable text record."""
    lines = [
        f"nvsforge-alignment {SCHEMA_VERSION}",
        f"alpha {params.alpha!r}",
        f"beta {params.beta!r}",
        f"rms_residual {params.rms_residual!r}",
        f"sample_count {params.sample_count}",
    ]
    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise WriteError(f"cannot write alignment {path}: {exc}") from None


def load_alignment(path) -> AlignmentParams:
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"missing alignment file: {path}")
    fields: dict[str, str] = {}
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("nvsforge-alignment"):
        raise DecodeError(f"{path}: not an alignment record")
    if lines[0].split()[1] != str(SCHEMA_VERSION):
        raise UnsupportedFormat(f"{path}: unsupported alignment version")
    for ln in lines[1:]:
        key, _, value = ln.partition(" ")
        fields[key] = value
    try:
        return AlignmentParams(
            alpha=float(fields["alpha"]),
            beta=float(fields["beta"]),
            rms_residual=float(fields["rms_residual"]),
            sample_count=int(fields["sample_count"]),
        )
    except (KeyError, ValueError) as exc:
        raise DecodeError(f"{path}: malformed alignment record: {exc}") from None


# --- conditioning bundles ---------------------------------------------------


def write_bundle(directory, bundle: ConditioningBundle) -> Path:
    """Persist a conditioning bundle; returns the manifest path.

    Layout: ``reference.png``, ``masked/%05d.png``, ``masks/%05d.png``,
    ``prompt.txt``, ``bundle.json``.
    """
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    try:
        Image.fromarray(bundle.reference_frame, "RGB").save(root / "reference.png", format="PNG")
        (root / "prompt.txt").write_text(bundle.prompt + "\n")
    except OSError as exc:
        raise WriteError(f"cannot write bundle under {root}: {exc}") from None
    save_frame_sequence(root / "masked", bundle.masked_video)
    save_mask_sequence(root / "masks", bundle.mask_video)
    h, w = bundle.reference_frame.shape[:2]
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "kind": "bundle",
        "frame_count": bundle.frame_count,
        "resolution": [w, h],
        "reference": "reference.png",
        "masked_pattern": "masked/" + FRAME_PATTERN,
        "mask_pattern": "masks/" + FRAME_PATTERN,
        "prompt_file": "prompt.txt",
    }
    path = root / "bundle.json"
    _write_json(path, manifest)
    return path


def load_bundle(directory) -> ConditioningBundle:
    """Load a bundle written by :func:`write_bundle`, bit-exactly."""
    root = Path(directory)
    payload = _read_json(root / "bundle.json", "bundle")
    try:
        count = int(payload["frame_count"])
        width, height = (int(x) for x in payload["resolution"])
        ref_img = _open_image(root / payload["reference"])
        if ref_img.mode != "RGB":
            raise DecodeError(f"{payload['reference']}: expected RGB reference frame")
        if (ref_img.width, ref_img.height) != (width, height):
            raise ResolutionMismatch("reference frame disagrees with manifest resolution")
        prompt = (root / payload["prompt_file"]).read_text().rstrip("\n")
        masked = load_frame_sequence(root, count, payload["masked_pattern"], (width, height))
        masks = load_mask_sequence(root, count, payload["mask_pattern"], (width, height))
    except KeyError as exc:
        raise ManifestError(f"{root / 'bundle.json'}: missing field {exc}") from None
    except OSError as exc:
        raise DecodeError(f"cannot read bundle under {root}: {exc}") from None
    return ConditioningBundle(
        reference_frame=np.asarray(ref_img, dtype=np.uint8),
        masked_video=masked,
        mask_video=masks,
        prompt=prompt,
    )


# --- training pairs ---------------------------------------------------------


def write_training_pair(directory, pair: TrainingPair) -> Path:
    """Persist a training pair; returns the manifest path.

    Layout: ``masked/``, ``masks/``, ``target/`` plus ``pair.json``.
    """
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    save_frame_sequence(root / "masked", pair.masked_video)
    save_mask_sequence(root / "masks", pair.mask_video)
    save_frame_sequence(root / "target", pair.target_video)
    h, w = pair.target_video.shape[1:3]
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "kind": "training_pair",
        "direction": pair.direction,
        "theta_deg": pair.theta_deg,
        "frame_count": pair.frame_count,
        "resolution": [w, h],
        "masked_pattern": "masked/" + FRAME_PATTERN,
        "mask_pattern": "masks/" + FRAME_PATTERN,
        "target_pattern": "target/" + FRAME_PATTERN,
    }
    path = root / "pair.json"
    _write_json(path, manifest)
    return path


def load_training_pair(directory) -> TrainingPair:
    root = Path(directory)
    payload = _read_json(root / "pair.json", "training_pair")
    try:
        count = int(payload["frame_count"])
        width, height = (int(x) for x in payload["resolution"])
        masked = load_frame_sequence(root, count, payload["masked_pattern"], (width, height))
        masks = load_mask_sequence(root, count, payload["mask_pattern"], (width, height))
        target = load_frame_sequence(root, count, payload["target_pattern"], (width, height))
        theta = float(payload["theta_deg"])
        direction = str(payload["direction"])
    except KeyError as exc:
        raise ManifestError(f"{root / 'pair.json'}: missing field {exc}") from None
    return TrainingPair(
        masked_video=masked,
        mask_video=masks,
        target_video=target,
        theta_deg=theta,
        direction=direction,
    )
