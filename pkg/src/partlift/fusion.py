"""Lift per-view 2D masks to per-point 3D labels by superpoint voting.

For superpoint i and category j the score is

    s[i, j] = (number of (view, point) pairs where the point belongs to i,
               is visible in the view, and projects inside the view's mask)
            / (number of (view, point) pairs where the point is visible)

Both counts are exact integers; division happens only when a score is read.
Superpoints never visible in any view have undefined scores and always map to
the background label.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gateway import SegmentResponse
from .render import ViewRender
from .superpoints import SuperpointPartition


@dataclass(frozen=True)
class ScoreMatrix:
    """Exact vote counts: numerator (S, J) int64 and visible_count (S,) int64."""

    numerator: np.ndarray
    visible_count: np.ndarray

    def __post_init__(self):
        num = np.asarray(self.numerator, dtype=np.int64)
        vis = np.asarray(self.visible_count, dtype=np.int64)
        if num.ndim != 2 or vis.ndim != 1 or num.shape[0] != vis.shape[0]:
            raise ValueError("numerator must be (S, J) with visible_count (S,)")
        if (num < 0).any() or (vis < 0).any():
            raise ValueError("vote counts must be nonnegative")
        if (num > vis[:, None]).any():
            raise ValueError("numerator cannot exceed the visibility count")
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "visible_count", vis)

    @property
    def scores(self) -> np.ndarray:
        """Float scores in [0, 1]; NaN rows mark never-visible superpoints."""
        vis = self.visible_count.astype(np.float64)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.numerator / vis
        out[self.visible_count == 0] = np.nan
        return out


@dataclass(frozen=True)
class LabelAssignment:
    """Per-superpoint and per-point labels; -1 is background."""

    superpoint_label: np.ndarray
    point_label: np.ndarray

    def remap(self, category_ids: Sequence[int]) -> "LabelAssignment":
        """Translate column indices into caller category ids, keeping -1."""
        ids = np.asarray(category_ids, dtype=np.int32)
        sp = np.where(self.superpoint_label >= 0,
                      ids[np.maximum(self.superpoint_label, 0)],
                      -1).astype(np.int32)
        pt = np.where(self.point_label >= 0,
                      ids[np.maximum(self.point_label, 0)],
                      -1).astype(np.int32)
        return LabelAssignment(superpoint_label=sp, point_label=pt)


def _in_mask(render: ViewRender, mask: np.ndarray) -> np.ndarray:
    """Per-point flag: projects inside the image and the mask is true there."""
    hit = np.zeros(render.pixel_x.shape[0], dtype=bool)
    sel = render.pixel_x >= 0
    hit[sel] = mask[render.pixel_y[sel], render.pixel_x[sel]]
    return hit


def compute_scores(partition: SuperpointPartition,
                   renders: Sequence[ViewRender],
                   masks: Sequence[Sequence[np.ndarray]]) -> ScoreMatrix:
    """Accumulate mask votes over views. masks[k][j] is view k, category j."""
    if len(masks) != len(renders):
        raise ValueError("need one mask list per render")
    if not renders:
        raise ValueError("need at least one view")
    n_cat = len(masks[0])
    s = partition.size
    sp = partition.assignment.astype(np.int64)
    numerator = np.zeros((s, n_cat), dtype=np.int64)
    visible_count = np.zeros(s, dtype=np.int64)
    for render, view_masks in zip(renders, masks):
        if len(view_masks) != n_cat:
            raise ValueError("every view must carry the same categories")
        if render.visible.shape[0] != sp.shape[0]:
            raise ValueError("render does not match the partition")
        vis = render.visible
        visible_count += np.bincount(sp[vis], minlength=s)
        for j, mask in enumerate(view_masks):
            if mask.shape != (render.height, render.width):
                raise ValueError("mask shape must match the render")
            voted = vis & _in_mask(render, mask)
            numerator[:, j] += np.bincount(sp[voted], minlength=s)
    return ScoreMatrix(numerator=numerator, visible_count=visible_count)


def assign_labels(scores: ScoreMatrix, partition: SuperpointPartition,
                  tau: float = 0.2) -> LabelAssignment:
    """Argmax over category scores with threshold tau; ties pick the lowest
    category index. Superpoints below tau or never visible become background.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be in [0, 1]")
    if scores.numerator.shape[0] != partition.size:
        raise ValueError("score matrix does not match the partition")
    sp_label = np.full(partition.size, -1, dtype=np.int32)
    defined = scores.visible_count > 0
    if scores.numerator.shape[1] > 0 and defined.any():
        num = scores.numerator[defined]
        vis = scores.visible_count[defined]
        best = num.argmax(axis=1)  # first maximum = lowest category index
        best_num = num[np.arange(num.shape[0]), best]
        keep = best_num / vis >= tau
        out = np.where(keep, best.astype(np.int32), -1)
        sp_label[defined] = out
    point_label = sp_label[partition.assignment]
    return LabelAssignment(superpoint_label=sp_label,
                           point_label=point_label.astype(np.int32))


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two boolean masks; two empty masks give 1.0."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError("mask shapes must match")
    union = int(np.logical_or(a, b).sum())
    if union == 0:
        return 1.0
    return int(np.logical_and(a, b).sum()) / union


@dataclass(frozen=True)
class ExplanationCandidate:
    """The explanation chosen for a query: its view, text, and agreement IoU."""

    view_index: int
    text: str
    iou: float


def select_explanation(renders: Sequence[ViewRender],
                       responses: Sequence[SegmentResponse],
                       labels: LabelAssignment,
                       category: int) -> ExplanationCandidate:
    """Keep the response whose mask best matches the fused labels.

    The comparison mask of a view marks pixels owned by a point whose fused
    label equals the category. The winner has the highest IoU against the
    response mask; ties go to the earliest view.
    """
    if len(renders) != len(responses) or not renders:
        raise ValueError("need one response per render")
    best = None
    for render, response in zip(renders, responses):
        owned = render.point_index >= 0
        fused = np.zeros_like(owned)
        fused[owned] = labels.point_label[render.point_index[owned]] == category
        iou = mask_iou(fused, response.mask)
        if best is None or iou > best.iou:
            best = ExplanationCandidate(view_index=render.view_index,
                                        text=response.explanation, iou=iou)
    return best
