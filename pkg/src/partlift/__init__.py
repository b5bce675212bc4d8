"""partlift: multi-view mask fusion for 3D part segmentation.

Renders a colored point cloud from a rig of virtual cameras, sends each view
to a pluggable 2D segmenter, and lifts the returned masks onto the points by
visibility-weighted superpoint voting.
"""

from ._kernels import HAVE_COMPILED
from .dataset import (DEFAULT_TEMPLATES, InstructionRecord, InstructionTemplate,
                      ObjectManifest, PartFeatures, extract_part_features,
                      generate_instructions, load_manifest, save_manifest)
from .evaluation import BACKGROUND_CATEGORY, EvalReport, category_miou
from .fusion import (ExplanationCandidate, LabelAssignment, ScoreMatrix,
                     assign_labels, compute_scores, mask_iou,
                     select_explanation)
from .gateway import (GatewayConnectionError, GatewayError, GatewayHTTPError,
                      GatewayProtocolError, MaskNotFoundError, OracleBackend,
                      RemoteBackend, RemoteConfig, ReplayBackend,
                      SegmenterBackend, SegmentRequest, SegmentResponse,
                      oracle_segment, rle_decode, rle_encode)
from .geometry import (NeighborGraph, PlyError, PointCloud, estimate_normals,
                       knn, load_ply, write_ply)
from .losses import (LossConfig, bce_loss, combined_loss, dice_loss, mask_loss,
                     text_loss)
from .pipeline import PipelineConfig, cmd_eval, cmd_run, cmd_synth, run_pipeline
from .render import (CameraPose, ViewRender, fibonacci_directions,
                     make_camera_rig, project_point, project_points,
                     render_view)
from .superpoints import (SuperpointPartition, build_superpoints,
                          superpoint_purity)
from .synth import (SHAPE_BUILDERS, SHAPE_OBJECT_CATEGORY, SHAPE_PARTS,
                    four_leg_chair, lidded_pot, make_shape, two_part_cylinder)

__version__ = "0.1.0"

__all__ = [
    "HAVE_COMPILED",
    "DEFAULT_TEMPLATES", "InstructionRecord", "InstructionTemplate",
    "ObjectManifest", "PartFeatures", "extract_part_features",
    "generate_instructions", "load_manifest", "save_manifest",
    "BACKGROUND_CATEGORY", "EvalReport", "category_miou",
    "ExplanationCandidate", "LabelAssignment", "ScoreMatrix",
    "assign_labels", "compute_scores", "mask_iou", "select_explanation",
    "GatewayConnectionError", "GatewayError", "GatewayHTTPError",
    "GatewayProtocolError", "MaskNotFoundError", "OracleBackend",
    "RemoteBackend", "RemoteConfig", "ReplayBackend", "SegmenterBackend",
    "SegmentRequest", "SegmentResponse", "oracle_segment",
    "rle_decode", "rle_encode",
    "NeighborGraph", "PlyError", "PointCloud", "estimate_normals",
    "knn", "load_ply", "write_ply",
    "LossConfig", "bce_loss", "combined_loss", "dice_loss", "mask_loss",
    "text_loss",
    "PipelineConfig", "cmd_eval", "cmd_run", "cmd_synth", "run_pipeline",
    "CameraPose", "ViewRender", "fibonacci_directions", "make_camera_rig",
    "project_point", "project_points", "render_view",
    "SuperpointPartition", "build_superpoints", "superpoint_purity",
    "SHAPE_BUILDERS", "SHAPE_OBJECT_CATEGORY", "SHAPE_PARTS",
    "four_leg_chair", "lidded_pot", "make_shape", "two_part_cylinder",
    "__version__",
]
