"""Command-line pipeline: rig, align, render, pairs, eval.

Contract:

* Exit codes: 0 success, 1 runtime/data error, 2 usage error.
* On success exactly one JSON run report (``schema_version`` 1) is
  printed to stdout; nothing else is.  Diagnostics go to stderr through
  ``logging``, with verbosity picked by the ``NVSFORGE_LOG`` environment
  variable (debug / info / warning / error; default warning).
* All parallelism lives here: ``--threads N`` bounds the worker pool and
  results are collected in index order, so every N produces bytes
  identical to ``--threads 1``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import assetio
from .camera import (
    RigSpec,
    apply_view_offset,
    generate_rig,
    preset_rig_inference,
    sample_virtual_view,
)
from .depthalign import apply_alignment, depth_centroid, solve_scale_shift
from .dwmesh import MeshConfig, build_frame_mesh
from .errors import BadRange, NvsforgeError
from .metrics import sequence_metrics
from .pairs import DEFAULT_PROMPT, assemble_training_pairs, make_conditioning_bundle
from .render import render_novel_view, source_visibility_mask

__all__ = ["main"]

LOG = logging.getLogger("nvsforge.cli")

REPORT_SCHEMA_VERSION = 1

_PRESETS = ("inference4",)


class UsageError(Exception):
    """Bad arguments or unusable inputs; mapped to exit code 2."""


def _configure_logging() -> None:
    name = os.environ.get("NVSFORGE_LOG", "warning").strip().lower()
    level = {
        "debug": logging.DEBUG,
        "info": logging.INFO,
        "warning": logging.WARNING,
        "error": logging.ERROR,
    }.get(name)
    if level is None:
        level = logging.WARNING
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s"
    )
    if name and level == logging.WARNING and name != "warning":
        LOG.warning("unknown NVSFORGE_LOG value %r, using warning", name)


class _Stopwatch:
    """Accumulates per-stage wall times for the run report."""

    def __init__(self) -> None:
        self.timing_ms: dict[str, float] = {}
        self._t0 = time.perf_counter()

    def stage(self, name: str):
        return _Stage(self, name)

    def total(self) -> float:
        return (time.perf_counter() - self._t0) * 1000.0


class _Stage:
    def __init__(self, watch: _Stopwatch, name: str) -> None:
        self._watch = watch
        self._name = name

    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, *exc) -> None:
        elapsed = (time.perf_counter() - self._start) * 1000.0
        self._watch.timing_ms[self._name] = self._watch.timing_ms.get(self._name, 0.0) + elapsed


def _emit_report(command: str, inputs: dict, outputs: dict, watch: _Stopwatch, payload: dict) -> None:
    watch.timing_ms["total"] = watch.total()
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "command": command,
        "inputs": inputs,
        "outputs": outputs,
        "timing_ms": watch.timing_ms,
        "payload": payload,
    }
    print(json.dumps(report, indent=2, sort_keys=True))


def _map_indexed(fn, count: int, threads: int) -> list:
    """Apply fn to 0..count-1, results in index order regardless of threads."""
    if threads <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _load_video(manifest_path: Path):
    """Load a manifest plus its RGB frames; returns (manifest, video)."""
    manifest = assetio.load_video_manifest(manifest_path)
    if manifest.frame_pattern is None:
        raise UsageError(f"{manifest_path}: manifest has no frame sequence")
    video = assetio.load_frame_sequence(
        manifest_path.parent, manifest.frame_count, manifest.frame_pattern, manifest.resolution
    )
    return manifest, video


def _load_depth(manifest_path: Path, kind: str):
    """Load a manifest's depth sequence; returns (manifest, DepthSequence)."""
    manifest = assetio.load_video_manifest(manifest_path)
    if manifest.depth_pattern is None:
        raise UsageError(f"{manifest_path}: manifest has no depth sequence")
    depth = assetio.load_depth_sequence(
        manifest_path.parent,
        manifest.frame_count,
        manifest.depth_format,
        manifest.depth_pattern,
        kind=kind,
        resolution=manifest.resolution,
    )
    return manifest, depth


def _depth_for(video_manifest_path: Path, depth_path: Path | None, kind: str):
    """Depth from --depth when given, else from the video manifest itself."""
    return _load_depth(depth_path if depth_path is not None else video_manifest_path, kind)


# --- rig --------------------------------------------------------------------


def cmd_rig(args) -> None:
    watch = _Stopwatch()
    with watch.stage("build"):
        if args.preset is not None:
            if args.preset not in _PRESETS:
                raise UsageError(f"unknown preset {args.preset!r} (known: {', '.join(_PRESETS)})")
            entries = list(preset_rig_inference())
            kind = assetio.RIG_KIND_OFFSET
        else:
            try:
                spec = RigSpec(
                    center=np.asarray(args.center, dtype=np.float64),
                    distance_m=args.distance,
                    elevation_deg=args.elevation,
                    azimuth_step_deg=args.step,
                    azimuth_halfrange_deg=args.halfrange,
                )
            except (BadRange, ValueError) as exc:
                raise UsageError(f"bad rig parameters: {exc}") from None
            entries = generate_rig(spec)
            kind = assetio.RIG_KIND_ABSOLUTE
    out = Path(args.out)
    with watch.stage("write"):
        assetio.save_rig(out, entries, kind)
    LOG.info("wrote %d-pose %s rig to %s", len(entries), kind, out)
    _emit_report(
        "rig",
        inputs={},
        outputs={"rig": str(out)},
        watch=watch,
        payload={
            "kind": kind,
            "pose_count": len(entries),
            "azimuths_deg": [azimuth for azimuth, _ in entries],
        },
    )


# --- align ------------------------------------------------------------------


def cmd_align(args) -> None:
    watch = _Stopwatch()
    relative_path = Path(args.relative)
    metric_path = Path(args.metric)
    with watch.stage("load"):
        rel_manifest, relative = _load_depth(relative_path, "relative")
        _, metric = _load_depth(metric_path, "metric")
    with watch.stage("solve"):
        params = solve_scale_shift(relative, metric)
        aligned = apply_alignment(relative, params)
    out = Path(args.out)
    with watch.stage("write"):
        assetio.save_depth_sequence(out / "depth", aligned)
        assetio.save_alignment(out / "alignment.txt", params)
        aligned_manifest = assetio.VideoManifest(
            frame_count=aligned.frame_count,
            resolution=rel_manifest.resolution,
            intrinsics=rel_manifest.intrinsics,
            pose=rel_manifest.pose,
            frame_pattern=None,
            depth_pattern="depth/" + "%05d.pfm",
            depth_format=assetio.DEPTH_FORMAT_PFM,
        )
        assetio.save_video_manifest(out / "aligned.json", aligned_manifest)
    LOG.info("alignment: alpha=%r beta=%r over %d samples", params.alpha, params.beta, params.sample_count)
    _emit_report(
        "align",
        inputs={"relative": str(relative_path), "metric": str(metric_path)},
        outputs={
            "aligned_manifest": str(out / "aligned.json"),
            "alignment": str(out / "alignment.txt"),
        },
        watch=watch,
        payload={
            "alpha": params.alpha,
            "beta": params.beta,
            "rms_residual": params.rms_residual,
            "sample_count": params.sample_count,
        },
    )


# --- render -----------------------------------------------------------------


def _resolve_rig_poses(rig_path: Path, depth, manifest):
    """Load a rig file and turn it into world->camera poses to render.

    Offset rigs orbit the source camera about the depth centroid of the
    first frame; absolute rigs are used verbatim.
    """
    if rig_path.exists() and not rig_path.read_text().strip():
        raise UsageError(f"{rig_path}: empty rig file")
    kind, entries = assetio.load_rig(rig_path)
    if not entries:
        raise UsageError(f"{rig_path}: rig file lists no poses")
    if kind == assetio.RIG_KIND_ABSOLUTE:
        return [(azimuth, pose) for azimuth, pose in entries]
    pivot = depth_centroid(
        depth.frames[0], manifest.intrinsics, manifest.pose, validity=depth.validity[0]
    )
    return [
        (azimuth, apply_view_offset(manifest.pose, offset_pose, pivot))
        for azimuth, offset_pose in entries
    ]


def cmd_render(args) -> None:
    watch = _Stopwatch()
    manifest_path = Path(args.manifest)
    with watch.stage("load"):
        manifest, video = _load_video(manifest_path)
        depth_manifest, depth = _depth_for(
            manifest_path, None if args.depth is None else Path(args.depth), "metric"
        )
        if depth.frame_count != manifest.frame_count:
            raise UsageError("depth and video frame counts differ")
        views = _resolve_rig_poses(Path(args.rig), depth, manifest)
    if args.bundle is not None and not 0 <= args.bundle_view < len(views):
        raise UsageError(f"--bundle-view {args.bundle_view} out of range for {len(views)} views")

    config = MeshConfig(discontinuity_tau=args.tau, grid_stride=args.stride)
    frame_count = manifest.frame_count
    with watch.stage("mesh"):
        meshes = _map_indexed(
            lambda t: build_frame_mesh(
                video[t], depth.frames[t], manifest.intrinsics, manifest.pose, config
            ),
            frame_count,
            args.threads,
        )
    with watch.stage("render"):
        flat = _map_indexed(
            lambda i: render_novel_view(
                meshes[i % frame_count], manifest.intrinsics, views[i // frame_count][1]
            ),
            len(views) * frame_count,
            args.threads,
        )
    out = Path(args.out)
    view_stats = []
    with watch.stage("write"):
        for v, (azimuth, pose) in enumerate(views):
            renders = flat[v * frame_count : (v + 1) * frame_count]
            view_dir = out / f"view_{v:03d}"
            assetio.save_frame_sequence(view_dir / "frames", np.stack([r.rgb for r in renders]))
            assetio.save_mask_sequence(view_dir / "masks", np.stack([r.mask for r in renders]))
            view_manifest = assetio.VideoManifest(
                frame_count=frame_count,
                resolution=manifest.resolution,
                intrinsics=manifest.intrinsics,
                pose=pose,
                mask_pattern="masks/" + assetio.FRAME_PATTERN,
            )
            assetio.save_video_manifest(view_dir / "video.json", view_manifest)
            occluded = [r.occluded_fraction for r in renders]
            view_stats.append(
                {
                    "index": v,
                    "azimuth_deg": azimuth,
                    "occluded_fraction_mean": float(np.mean(occluded)),
                    "occluded_fraction_max": float(np.max(occluded)),
                }
            )
            LOG.info(
                "view %d (azimuth %g): occluded fraction %.4f",
                v,
                azimuth,
                view_stats[-1]["occluded_fraction_mean"],
            )
        bundle_path = None
        if args.bundle is not None:
            renders = flat[args.bundle_view * frame_count : (args.bundle_view + 1) * frame_count]
            bundle = make_conditioning_bundle(video, renders, args.prompt)
            bundle_path = str(assetio.write_bundle(Path(args.bundle), bundle))
    _emit_report(
        "render",
        inputs={
            "manifest": str(manifest_path),
            "depth": str(args.depth) if args.depth else str(manifest_path),
            "rig": str(args.rig),
        },
        outputs={"views": str(out), "bundle": bundle_path},
        watch=watch,
        payload={
            "view_count": len(views),
            "frame_count": frame_count,
            "views": view_stats,
        },
    )


# --- pairs ------------------------------------------------------------------


def cmd_pairs(args) -> None:
    watch = _Stopwatch()
    manifest_path = Path(args.manifest)
    with watch.stage("load"):
        manifest, video = _load_video(manifest_path)
        _, depth = _depth_for(
            manifest_path, None if args.depth is None else Path(args.depth), "metric"
        )
        if depth.frame_count != manifest.frame_count:
            raise UsageError("depth and video frame counts differ")
    lo, hi = args.range
    with watch.stage("sample"):
        pivot = depth_centroid(
            depth.frames[0], manifest.intrinsics, manifest.pose, validity=depth.validity[0]
        )
        try:
            theta, virtual_pose = sample_virtual_view(
                pivot, manifest.pose, (lo, hi), args.seed
            )
        except BadRange as exc:
            raise UsageError(f"bad --range: {exc}") from None

    config = MeshConfig(discontinuity_tau=args.tau, grid_stride=args.stride)

    def frame_mask(t: int):
        mesh = build_frame_mesh(
            video[t], depth.frames[t], manifest.intrinsics, manifest.pose, config
        )
        return source_visibility_mask(
            mesh, manifest.intrinsics, manifest.pose, virtual_pose, args.bias
        )

    with watch.stage("mask"):
        masks = np.stack(_map_indexed(frame_mask, manifest.frame_count, args.threads))
        forward, complement = assemble_training_pairs(video, masks, theta)

    partition_ok = bool(np.all(forward.mask_video + complement.mask_video == 1))
    LOG.info("mask partition M + complement == 1: %s", "pass" if partition_ok else "FAIL")

    out = Path(args.out)
    with watch.stage("write"):
        forward_path = assetio.write_training_pair(out / "forward", forward)
        complement_path = assetio.write_training_pair(out / "complement", complement)
    _emit_report(
        "pairs",
        inputs={
            "manifest": str(manifest_path),
            "depth": str(args.depth) if args.depth else str(manifest_path),
        },
        outputs={"forward": str(forward_path), "complement": str(complement_path)},
        watch=watch,
        payload={
            "theta_deg": theta,
            "seed": args.seed,
            "magnitude_range_deg": [lo, hi],
            "mask_partition_ok": partition_ok,
            "occluded_fraction_mean": float(np.mean(forward.mask_video)),
        },
    )


# --- eval -------------------------------------------------------------------


def cmd_eval(args) -> None:
    watch = _Stopwatch()
    generated_path = Path(args.generated)
    reference_path = Path(args.reference)
    with watch.stage("load"):
        _, generated = _load_video(generated_path)
        _, reference = _load_video(reference_path)
        masks = None
        if args.masks is not None:
            masks = assetio.load_mask_sequence(
                Path(args.masks), generated.shape[0], resolution=None
            )
    with watch.stage("metrics"):
        report = sequence_metrics(generated, reference, masks)
    outputs = {}
    if args.out is not None:
        with watch.stage("write"):
            out = Path(args.out)
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        outputs["report"] = str(out)
    LOG.info("mean PSNR %.4f dB, mean SSIM %.6f", report.mean_psnr, report.mean_ssim)
    _emit_report(
        "eval",
        inputs={
            "generated": str(generated_path),
            "reference": str(reference_path),
            "masks": str(args.masks) if args.masks else None,
        },
        outputs=outputs,
        watch=watch,
        payload=report.to_dict(),
    )


# --- parser / entry ----------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nvsforge",
        description="Deterministic geometry pipeline: depth alignment, depth meshes, "
        "novel-view rendering with occlusion masks, training pairs, metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    rig = sub.add_parser("rig", help="write a camera rig file")
    rig.add_argument("--out", required=True, help="output rig file")
    rig.add_argument("--preset", help="named rig preset (inference4)")
    rig.add_argument(
        "--center", nargs=3, type=float, default=(0.0, 0.0, 0.0), metavar=("X", "Y", "Z"),
        help="workspace center the cameras aim at (default origin)",
    )
    rig.add_argument("--distance", type=float, default=1.70, help="camera distance in meters")
    rig.add_argument("--elevation", type=float, default=45.0, help="elevation angle in degrees")
    rig.add_argument("--step", type=float, default=10.0, help="azimuth step in degrees")
    rig.add_argument(
        "--halfrange", type=float, default=60.0, help="azimuth half-range in degrees"
    )
    rig.set_defaults(func=cmd_rig)

    align = sub.add_parser("align", help="fit scale/shift of relative depth to metric depth")
    align.add_argument("--relative", required=True, help="manifest with relative depth")
    align.add_argument("--metric", required=True, help="manifest with metric depth")
    align.add_argument("--out", required=True, help="output directory")
    align.set_defaults(func=cmd_align)

    render = sub.add_parser("render", help="render novel views of a video under a rig")
    render.add_argument("--manifest", required=True, help="source video manifest")
    render.add_argument("--depth", help="aligned-depth manifest (default: depth in --manifest)")
    render.add_argument("--rig", required=True, help="rig file from the rig command")
    render.add_argument("--out", required=True, help="output directory (one subdir per view)")
    render.add_argument("--tau", type=float, default=0.1, help="discontinuity threshold factor")
    render.add_argument("--stride", type=_positive_int, default=1, help="mesh grid stride")
    render.add_argument("--threads", type=_positive_int, default=1, help="worker thread count")
    render.add_argument("--bundle", help="also write a conditioning bundle to this directory")
    render.add_argument(
        "--bundle-view", type=int, default=0, help="rig view index the bundle uses"
    )
    render.add_argument("--prompt", default=DEFAULT_PROMPT, help="bundle text prompt")
    render.set_defaults(func=cmd_render)

    pairs = sub.add_parser("pairs", help="build forward/complement training pairs")
    pairs.add_argument("--manifest", required=True, help="source video manifest")
    pairs.add_argument("--depth", help="aligned-depth manifest (default: depth in --manifest)")
    pairs.add_argument("--out", required=True, help="output directory")
    pairs.add_argument("--seed", type=int, default=0, help="seed for the virtual-view draw")
    pairs.add_argument(
        "--range", nargs=2, type=float, default=(20.0, 60.0), metavar=("LO", "HI"),
        help="virtual-view magnitude range in degrees",
    )
    pairs.add_argument("--tau", type=float, default=0.1, help="discontinuity threshold factor")
    pairs.add_argument("--stride", type=_positive_int, default=1, help="mesh grid stride")
    pairs.add_argument("--bias", type=float, default=1e-3, help="visibility depth bias")
    pairs.add_argument("--threads", type=_positive_int, default=1, help="worker thread count")
    pairs.set_defaults(func=cmd_pairs)

    ev = sub.add_parser("eval", help="PSNR/SSIM of a generated video against a reference")
    ev.add_argument("--generated", required=True, help="generated video manifest")
    ev.add_argument("--reference", required=True, help="reference video manifest")
    ev.add_argument("--masks", help="directory of occlusion masks for occluded statistics")
    ev.add_argument("--out", help="write the metric report JSON here too")
    ev.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"nvsforge {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except NvsforgeError as exc:
        print(f"nvsforge {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"nvsforge {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
