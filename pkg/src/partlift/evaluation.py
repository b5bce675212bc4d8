"""Category-level mean IoU over per-point part labels.

Per part, intersection and union are pooled over every object before
dividing; part IoUs are then averaged within each object category, and the
overall score is the mean over object categories. Parts whose pooled union is
empty are left out. Background points (label -1) are ignored unless
include_background is set, in which case background is scored as its own
synthetic object category.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

BACKGROUND_CATEGORY = "__background__"


@dataclass(frozen=True)
class EvalReport:
    """Per-part IoU, per-object-category mIoU, and the overall mean."""

    per_part_iou: dict[int, float]
    per_object_category_miou: dict[str, float]
    overall_miou: float

    def to_dict(self) -> dict:
        return {
            "per_part_iou": {str(k): v for k, v in self.per_part_iou.items()},
            "per_object_category_miou": dict(self.per_object_category_miou),
            "overall_miou": self.overall_miou,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n",
                              encoding="utf-8")


def category_miou(predictions: dict[str, np.ndarray],
                  ground_truth: dict[str, np.ndarray],
                  part_to_object_category: dict[int, str],
                  include_background: bool = False) -> EvalReport:
    """Pooled-per-part mIoU grouped by object category.

    predictions and ground_truth map object id to an (N,) integer label array
    with -1 for background. Every non-background label appearing in either
    array must be present in part_to_object_category.
    """
    if set(predictions) != set(ground_truth):
        raise ValueError("predictions and ground truth must cover the same objects")
    inter: dict[int, int] = {p: 0 for p in part_to_object_category}
    union: dict[int, int] = {p: 0 for p in part_to_object_category}
    bg_inter = 0
    bg_union = 0
    for obj_id in sorted(ground_truth):
        pred = np.asarray(predictions[obj_id])
        gt = np.asarray(ground_truth[obj_id])
        if pred.shape != gt.shape:
            raise ValueError(f"label shape mismatch for object {obj_id!r}")
        seen = set(int(v) for v in np.unique(pred)) | set(int(v) for v in np.unique(gt))
        unknown = sorted(v for v in seen if v != -1 and v not in part_to_object_category)
        if unknown:
            raise ValueError(f"unknown part id {unknown[0]} in object {obj_id!r}")
        for part in part_to_object_category:
            p = pred == part
            g = gt == part
            inter[part] += int(np.logical_and(p, g).sum())
            union[part] += int(np.logical_or(p, g).sum())
        if include_background:
            p = pred == -1
            g = gt == -1
            bg_inter += int(np.logical_and(p, g).sum())
            bg_union += int(np.logical_or(p, g).sum())

    per_part = {p: inter[p] / union[p]
                for p in sorted(part_to_object_category) if union[p] > 0}

    grouped: dict[str, list[float]] = {}
    for part, iou in per_part.items():
        grouped.setdefault(part_to_object_category[part], []).append(iou)
    per_category = {cat: float(np.mean(vals))
                    for cat, vals in sorted(grouped.items())}
    if include_background and bg_union > 0:
        per_category[BACKGROUND_CATEGORY] = bg_inter / bg_union

    if not per_category:
        raise ValueError("no part has a nonempty union; nothing to score")
    overall = float(np.mean(list(per_category.values())))
    return EvalReport(per_part_iou=per_part,
                      per_object_category_miou=per_category,
                      overall_miou=overall)
