"""Geometric over-segmentation of colored point clouds.

Superpoints are connected components of the kNN graph after removing edges
whose endpoints disagree in normal direction or color. Components below a
minimum size are merged into the neighboring component they touch the most,
so the final partition has no tiny fragments (unless the whole cloud is one).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .geometry import NeighborGraph, PointCloud

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SuperpointPartition:
    """A partition of point indices into contiguous superpoint ids [0, size).

    assignment maps each point to its superpoint id; superpoint_members lists
    the sorted member indices per id. The two views must stay consistent.
    """

    assignment: np.ndarray
    superpoint_members: list[np.ndarray]

    def __post_init__(self):
        assignment = np.ascontiguousarray(self.assignment, dtype=np.int32)
        assignment.setflags(write=False)
        object.__setattr__(self, "assignment", assignment)
        s = len(self.superpoint_members)
        if assignment.ndim != 1:
            raise ValueError("assignment must be one-dimensional")
        if s == 0 and assignment.size > 0:
            raise ValueError("no superpoints for a nonempty cloud")
        if s > 0 and (assignment.min() < 0 or assignment.max() >= s):
            raise ValueError("assignment ids out of range")
        total = 0
        for sid, members in enumerate(self.superpoint_members):
            if members.size == 0:
                raise ValueError(f"superpoint {sid} is empty")
            if not np.all(assignment[members] == sid):
                raise ValueError("assignment and member lists disagree")
            total += members.size
        if total != assignment.size:
            raise ValueError("member lists must partition all points")

    @classmethod
    def from_assignment(cls, assignment: np.ndarray) -> "SuperpointPartition":
        assignment = np.asarray(assignment, dtype=np.int32)
        size = int(assignment.max()) + 1 if assignment.size else 0
        order = np.argsort(assignment, kind="stable")
        splits = np.searchsorted(assignment[order], np.arange(1, size))
        members = [np.ascontiguousarray(m) for m in np.split(order, splits)]
        return cls(assignment=assignment, superpoint_members=members)

    @property
    def size(self) -> int:
        return len(self.superpoint_members)


def _relabel_by_first_member(labels: np.ndarray) -> np.ndarray:
    """Renumber component labels so ids ascend with the smallest member index."""
    size = int(labels.max()) + 1 if labels.size else 0
    first = np.full(size, labels.size, dtype=np.int64)
    np.minimum.at(first, labels, np.arange(labels.size))
    remap = np.empty(size, dtype=np.int64)
    remap[np.argsort(first, kind="stable")] = np.arange(size)
    return remap[labels]


def build_superpoints(cloud: PointCloud, graph: NeighborGraph,
                      normal_angle_deg: float = 30.0,
                      color_dist: float = 30.0,
                      min_size: int = 5) -> SuperpointPartition:
    """Grow superpoints over kNN edges gated by normal angle and color distance.

    An edge survives when the angle between endpoint normals is at most
    normal_angle_deg and the Euclidean RGB distance is at most color_dist.
    Surviving edges are treated as undirected; connected components become
    superpoints, then components smaller than min_size are absorbed by the
    adjacent component with the most members adjacent to them (ties to the
    lower component id). Ids are renumbered by ascending smallest member.
    """
    if cloud.normals is None:
        raise ValueError("build_superpoints requires normals")
    if min_size < 1:
        raise ValueError("min_size must be positive")
    n = cloud.n
    if n == 0:
        return SuperpointPartition(np.zeros(0, dtype=np.int32), [])
    if graph.adjacency.shape[0] != n:
        raise ValueError("graph does not match cloud")

    k_eff = graph.adjacency.shape[1]
    rows = np.repeat(np.arange(n, dtype=np.int64), k_eff)
    cols = graph.adjacency.ravel().astype(np.int64)

    cos_limit = math.cos(math.radians(normal_angle_deg))
    cos_ang = np.einsum("ij,ij->i", cloud.normals[rows], cloud.normals[cols])
    c = cloud.colors.astype(np.int64)
    dc = c[rows] - c[cols]
    color_ok = np.einsum("ij,ij->i", dc, dc) <= color_dist * color_dist
    # small slack: unit normals at exactly the cutoff angle must survive rounding
    keep = (cos_ang >= cos_limit - 1e-12) & color_ok

    adj = coo_matrix((np.ones(keep.sum(), dtype=np.int8),
                      (rows[keep], cols[keep])), shape=(n, n))
    _, labels = connected_components(adj, directed=False)
    labels = _relabel_by_first_member(labels)
    size = int(labels.max()) + 1

    sizes = np.bincount(labels, minlength=size)
    small = np.flatnonzero(sizes < min_size)
    if small.size and size > 1:
        labels = _merge_small(labels, sizes, small, rows, cols, min_size)
        labels = _relabel_by_first_member(labels)

    return SuperpointPartition.from_assignment(labels)


def _merge_small(labels, sizes, small, rows, cols, min_size):
    """Absorb undersized components into their strongest kNN neighbor."""
    parent = np.arange(sizes.size, dtype=np.int64)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    cross = labels[rows] != labels[cols]
    pairs = np.unique(np.stack([labels[rows[cross]], cols[cross]], axis=1), axis=0)
    contacts: dict[int, set[int]] = {}
    for comp, point in pairs:
        contacts.setdefault(int(comp), set()).add(int(point))
    comp_size = {int(i): int(s) for i, s in enumerate(sizes)}

    for comp in small:
        comp = int(comp)
        root = find(comp)
        if comp_size[root] >= min_size:
            continue
        votes: dict[int, int] = {}
        for point in contacts.get(root, ()):
            other = find(int(labels[point]))
            if other != root:
                votes[other] = votes.get(other, 0) + 1
        if not votes:
            continue  # isolated fragment, keep it as its own superpoint
        best = min(votes, key=lambda t: (-votes[t], t))
        # union: keep the smaller id as representative for determinism
        keep_id, drop_id = (root, best) if root < best else (best, root)
        parent[drop_id] = keep_id
        comp_size[keep_id] = comp_size[root] + comp_size[best]
        merged = contacts.pop(drop_id, set()) | contacts.pop(keep_id, set())
        contacts[keep_id] = merged

    roots = np.array([find(int(c)) for c in range(sizes.size)], dtype=np.int64)
    return roots[labels]


def superpoint_purity(partition: SuperpointPartition, gt_labels: np.ndarray) -> float:
    """Fraction of points whose superpoint's majority label matches their own.

    Equivalently: sum over superpoints of the count of the most frequent
    ground-truth label, divided by the total point count.
    """
    gt = np.asarray(gt_labels)
    if gt.shape != partition.assignment.shape:
        raise ValueError("gt_labels length must match the partition")
    if gt.size == 0:
        raise ValueError("empty partition has no purity")
    agree = 0
    for members in partition.superpoint_members:
        _, counts = np.unique(gt[members], return_counts=True)
        agree += int(counts.max())
    return agree / gt.size
