"""nvsforge: geometry stage for multi-view synthesis from monocular robot video.

The package turns a single fixed-viewpoint RGB video plus per-frame depth
into the inputs a video-synthesis model consumes: aligned metric depth, a
watertight per-frame depth mesh, novel-view renders with occlusion masks,
bi-directionally masked training pairs, and a conditioning bundle, plus
reference metrics and bit-exact asset persistence.

Modules:
    camera      pinhole model, viewing-cone rig, seeded virtual views
    depthalign  inverse-depth scale/shift alignment to metric depth
    dwmesh      watertight depth-mesh construction with wall faces
    render      deterministic software z-buffer renderer and visibility
    pairs       bi-directional masking and conditioning bundles
    metrics     PSNR / SSIM / sequence reports
    assetio     manifests and bit-exact frame, depth, mask, rig, bundle IO
    cli         the ``nvsforge`` command-line pipeline
"""

from . import errors
from .camera import (
    Intrinsics,
    RigidPose,
    RigSpec,
    backproject,
    generate_rig,
    look_at,
    preset_rig_inference,
    project,
    rotate_pose_about_vertical,
    sample_virtual_view,
)
from .depthalign import (
    AlignmentParams,
    DepthSequence,
    apply_alignment,
    depth_centroid,
    solve_scale_shift,
)
from .dwmesh import FrameMesh, MeshConfig, build_frame_mesh, watertightness_report
from .metrics import MetricReport, psnr, sequence_metrics, ssim
from .pairs import (
    ConditioningBundle,
    TrainingPair,
    complement_masks,
    make_conditioning_bundle,
    make_training_pairs,
    mask_frames,
)
from .render import (
    RenderOutput,
    render_novel_view,
    render_sequence,
    source_visibility_mask,
)

__version__ = "0.1.0"

__all__ = [
    "errors",
    "Intrinsics",
    "RigidPose",
    "RigSpec",
    "look_at",
    "generate_rig",
    "preset_rig_inference",
    "rotate_pose_about_vertical",
    "sample_virtual_view",
    "project",
    "backproject",
    "DepthSequence",
    "AlignmentParams",
    "solve_scale_shift",
    "apply_alignment",
    "depth_centroid",
    "FrameMesh",
    "MeshConfig",
    "build_frame_mesh",
    "watertightness_report",
    "RenderOutput",
    "render_novel_view",
    "render_sequence",
    "source_visibility_mask",
    "TrainingPair",
    "ConditioningBundle",
    "mask_frames",
    "complement_masks",
    "make_training_pairs",
    "make_conditioning_bundle",
    "MetricReport",
    "psnr",
    "ssim",
    "sequence_metrics",
    "__version__",
]
