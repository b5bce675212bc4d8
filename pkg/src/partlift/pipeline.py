"""End-to-end orchestration: render, segment, fuse, explain, export.

Objects run sequentially; per-view work (render and segment calls) fans out
over a thread pool capped at the configured job count. All cross-view merges
are integer-count sums, so results are identical for any thread count.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict, replace
from pathlib import Path

import numpy as np

from . import gateway
from .dataset import ObjectManifest, load_manifest
from .evaluation import category_miou
from .fusion import assign_labels, compute_scores, select_explanation
from .geometry import PointCloud, estimate_normals, knn, load_ply, write_ply
from .render import make_camera_rig, render_view
from .superpoints import SuperpointPartition, build_superpoints

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_OBJECT_FAILURES = 1
EXIT_UNREADABLE = 2


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the run pipeline; defaults give the reference setup."""

    views: int = 10
    image_size: int = 512
    fov: float = 60.0
    distance_factor: float = 2.2
    splat_radius_px: int = 2
    depth_tolerance: float = 0.01
    knn_k: int = 10
    normal_angle_deg: float = 30.0
    color_dist: float = 30.0
    min_superpoint_size: int = 5
    tau: float = 0.2
    backend: str = "oracle"
    jobs: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.views < 1:
            raise ValueError("views must be positive")
        if self.image_size < 16:
            raise ValueError("image_size must be at least 16")
        if not 0.0 < self.fov < 180.0:
            raise ValueError("fov must be in (0, 180)")
        if self.distance_factor <= 1.0:
            raise ValueError("distance_factor must exceed 1.0")
        if self.splat_radius_px < 1 or self.depth_tolerance <= 0:
            raise ValueError("invalid splat settings")
        if self.knn_k < 3:
            raise ValueError("knn_k must be at least 3")
        if self.min_superpoint_size < 1:
            raise ValueError("min_superpoint_size must be positive")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must be in [0, 1]")
        if self.jobs < 1:
            raise ValueError("jobs must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return replace(cls(), **data)


def _make_backend(config: PipelineConfig):
    """Backend factory from the selector string.

    oracle builds per object (it needs the object's cloud and renders);
    replay:<dir> and remote:<url> are shared across objects.
    """
    sel = config.backend
    if sel == "oracle":
        return lambda cloud, renders, cats: gateway.OracleBackend(cloud, renders, cats)
    if sel.startswith("replay:"):
        shared = gateway.ReplayBackend(sel[len("replay:"):])
        return lambda cloud, renders, cats: shared
    if sel.startswith("remote:"):
        shared = gateway.RemoteBackend(
            sel[len("remote:"):],
            gateway.RemoteConfig(max_inflight=config.jobs))
        return lambda cloud, renders, cats: shared
    raise ValueError(f"unknown backend selector {config.backend!r}; "
                     "use oracle, replay:<dir>, or remote:<url>")


def _trivial_partition(n: int) -> SuperpointPartition:
    return SuperpointPartition.from_assignment(np.arange(n, dtype=np.int32))


def _segment_object(manifest: ObjectManifest, cloud: PointCloud,
                    config: PipelineConfig, backend, pool) -> dict:
    """Run one object end to end; returns labels, responses, and a log entry."""
    t0 = time.perf_counter()
    size = (config.image_size, config.image_size)
    rig = make_camera_rig(cloud, config.views, image_size=size,
                          fov=config.fov,
                          distance_factor=config.distance_factor)
    renders = list(pool.map(
        lambda kp: render_view(cloud, kp[1],
                               splat_radius_px=config.splat_radius_px,
                               depth_tolerance=config.depth_tolerance,
                               view_index=kp[0]),
        enumerate(rig)))

    if cloud.n >= max(4, config.knn_k + 1):
        graph = knn(cloud, config.knn_k)
        with_normals = (cloud if cloud.normals is not None
                        else estimate_normals(cloud, graph))
        partition = build_superpoints(with_normals, graph,
                                      normal_angle_deg=config.normal_angle_deg,
                                      color_dist=config.color_dist,
                                      min_size=config.min_superpoint_size)
    else:
        logger.warning("object %s: only %d points, using per-point superpoints",
                       manifest.object_id, cloud.n)
        partition = _trivial_partition(cloud.n)

    records = list(manifest.instructions)
    query_ids = [f"{manifest.object_id}-q{i:03d}" for i in range(len(records))]
    cats = {qid: r.category for qid, r in zip(query_ids, records)}
    obj_backend = backend(cloud, renders, cats)

    def ask(args):
        qid, record, view = args
        request = gateway.SegmentRequest(image=renders[view].image,
                                         instruction=record.query,
                                         query_id=qid, view_index=view)
        return obj_backend.segment(request)

    jobs = [(qid, r, k)
            for qid, r in zip(query_ids, records)
            for k in range(config.views)]
    answers = list(pool.map(ask, jobs))
    responses = {}
    for (qid, _, view), resp in zip(jobs, answers):
        responses.setdefault(qid, [None] * config.views)[view] = resp

    categories = sorted({r.category for r in records})
    col = {c: j for j, c in enumerate(categories)}
    h = w = config.image_size
    masks = []
    for k in range(config.views):
        view_masks = [np.zeros((h, w), dtype=bool) for _ in categories]
        for qid, record in zip(query_ids, records):
            view_masks[col[record.category]] |= responses[qid][k].mask
        masks.append(view_masks)

    if categories:
        scores = compute_scores(partition, renders, masks)
        assignment = assign_labels(scores, partition, config.tau)
        assignment = assignment.remap(categories)
    else:
        assignment = None

    point_labels = (assignment.point_label if assignment is not None
                    else np.full(cloud.n, -1, dtype=np.int32))

    explanations = {}
    for qid, record in zip(query_ids, records):
        chosen = select_explanation(renders, responses[qid], assignment,
                                    record.category)
        explanations[qid] = chosen
        if not (point_labels == record.category).any():
            logger.warning("object %s query %s: no points labeled category %d",
                           manifest.object_id, qid, record.category)

    summary = {
        "object_id": manifest.object_id,
        "status": "ok",
        "seconds": round(time.perf_counter() - t0, 3),
        "n_points": cloud.n,
        "n_superpoints": partition.size,
        "instructions": [
            {
                "query_id": qid,
                "category": r.category,
                "best_view": explanations[qid].view_index,
                "iou": round(explanations[qid].iou, 6),
                "points_labeled": int((point_labels == r.category).sum()),
            }
            for qid, r in zip(query_ids, records)
        ],
    }
    return {"labels": point_labels, "explanations": explanations,
            "summary": summary}


def run_pipeline(manifests: list[ObjectManifest], config: PipelineConfig,
                 out_dir) -> int:
    """Process every object, writing predictions, explanations, and a run log.

    Returns 0 when all objects succeed, 1 when any object failed. Failures
    are isolated per object; the pipeline always finishes the manifest.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not manifests:
        logger.warning("empty manifest, nothing to do")
        _write_run_log(out_dir, config, [])
        return EXIT_OK

    backend = _make_backend(config)
    entries = []
    failed = []
    with ThreadPoolExecutor(max_workers=config.jobs) as pool:
        for manifest in manifests:
            try:
                cloud = load_ply(manifest.ply_path,
                                 label_property=manifest.label_property)
                result = _segment_object(manifest, cloud, config, backend, pool)
            except (gateway.GatewayError, ValueError, OSError) as exc:
                logger.error("object %s failed: %s", manifest.object_id, exc)
                failed.append(manifest.object_id)
                entries.append({"object_id": manifest.object_id,
                                "status": "failed", "error": str(exc)})
                continue
            labeled = cloud.with_labels(result["labels"])
            write_ply(labeled, out_dir / f"{manifest.object_id}_pred.ply")
            for qid, chosen in result["explanations"].items():
                text = (f"view_index={chosen.view_index}\n"
                        f"iou={chosen.iou:.6f}\n\n{chosen.text}\n")
                (out_dir / f"{qid}.txt").write_text(text, encoding="utf-8")
            entries.append(result["summary"])

    _write_run_log(out_dir, config, entries, failed)
    if failed:
        logger.error("failed objects: %s", ", ".join(failed))
        return EXIT_OBJECT_FAILURES
    return EXIT_OK


def _write_run_log(out_dir: Path, config: PipelineConfig, entries,
                   failed=()) -> None:
    log = {"config": config.to_dict(), "objects": entries,
           "failed_objects": list(failed)}
    (out_dir / "run_log.json").write_text(json.dumps(log, indent=2) + "\n",
                                          encoding="utf-8")


def cmd_run(manifest_path, config: PipelineConfig, out_dir) -> int:
    """Load a manifest and run the pipeline; exit 2 when inputs are unreadable."""
    try:
        manifests = load_manifest(manifest_path)
    except ValueError as exc:
        logger.error("%s", exc)
        return EXIT_UNREADABLE
    missing = [m.ply_path for m in manifests if not Path(m.ply_path).is_file()]
    if missing:
        logger.error("missing input clouds: %s", ", ".join(missing))
        return EXIT_UNREADABLE
    return run_pipeline(manifests, config, out_dir)


def cmd_eval(pred_dir, manifest_path, out_path=None,
             include_background: bool = False) -> int:
    """Score predictions in pred_dir against manifest ground truth.

    Prints the per-part and per-object-category tables, writes the report
    JSON next to the predictions (or to out_path), exit 2 when any prediction
    or ground-truth file is missing or unreadable.
    """
    pred_dir = Path(pred_dir)
    try:
        manifests = load_manifest(manifest_path)
    except ValueError as exc:
        logger.error("%s", exc)
        return EXIT_UNREADABLE

    predictions = {}
    ground_truth = {}
    part_to_cat = {}
    for m in manifests:
        pred_path = pred_dir / f"{m.object_id}_pred.ply"
        if not pred_path.is_file():
            logger.error("missing prediction for object %s (%s)",
                         m.object_id, pred_path)
            return EXIT_UNREADABLE
        try:
            gt_cloud = load_ply(m.ply_path, label_property=m.label_property)
            pred_cloud = load_ply(pred_path)
        except (OSError, ValueError) as exc:
            logger.error("object %s: %s", m.object_id, exc)
            return EXIT_UNREADABLE
        if gt_cloud.labels is None:
            logger.error("object %s: ground truth has no labels", m.object_id)
            return EXIT_UNREADABLE
        predictions[m.object_id] = (pred_cloud.labels
                                    if pred_cloud.labels is not None
                                    else np.full(pred_cloud.n, -1, np.int32))
        ground_truth[m.object_id] = gt_cloud.labels
        for cat in np.unique(gt_cloud.labels):
            if cat >= 0:
                part_to_cat[int(cat)] = m.object_category
        for record in m.instructions:
            part_to_cat[record.category] = m.object_category

    report = category_miou(predictions, ground_truth, part_to_cat,
                           include_background=include_background)
    print("per-part IoU:")
    for part, iou in report.per_part_iou.items():
        print(f"  part {part:4d}  {iou:.4f}")
    print("per-object-category mIoU:")
    for cat, miou in report.per_object_category_miou.items():
        print(f"  {cat:20s}  {miou:.4f}")
    print(f"overall mIoU: {report.overall_miou:.4f}")
    report.save(out_path or pred_dir / "eval_report.json")
    return EXIT_OK


def cmd_synth(shape: str, points: int, seed: int, out_dir) -> int:
    """Generate one labeled shape plus its manifest entry in out_dir.

    <shape>.ply plus an updated manifest.json holding instructions generated
    from the part features. Rerunning with the same arguments is idempotent.
    """
    from .dataset import (extract_part_features, generate_instructions,
                          save_manifest)
    from .synth import SHAPE_OBJECT_CATEGORY, SHAPE_PARTS, make_shape

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cloud = make_shape(shape, points, seed)
    ply_name = f"{shape}.ply"
    write_ply(cloud, out_dir / ply_name)

    records = []
    for part in SHAPE_PARTS[shape]:
        features = extract_part_features(cloud, part.category)
        records.extend(generate_instructions(
            features, part.name, seed=seed + part.category,
            object_id=shape, category=part.category, gt_mask_ref=ply_name))

    manifest_path = out_dir / "manifest.json"
    entries = []
    if manifest_path.is_file():
        entries = [m for m in load_manifest(manifest_path)
                   if m.object_id != shape]
        # keep stored paths relative to the manifest
        entries = [replace(m, ply_path=Path(m.ply_path).name) for m in entries]
    entries.append(ObjectManifest(object_id=shape,
                                  object_category=SHAPE_OBJECT_CATEGORY[shape],
                                  ply_path=ply_name,
                                  instructions=tuple(records)))
    entries.sort(key=lambda m: m.object_id)
    save_manifest(entries, manifest_path)
    logger.info("wrote %s and %d instructions", ply_name, len(records))
    return EXIT_OK
