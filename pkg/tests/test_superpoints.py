"""Partition invariants, edge gating, small-fragment merging, and purity."""

import numpy as np
import pytest

from partlift import (PointCloud, SuperpointPartition, build_superpoints,
                      estimate_normals, knn, make_shape, superpoint_purity)

from .conftest import random_cloud


def build_for(cloud, k=8, **kwargs):
    graph = knn(cloud, k)
    with_normals = estimate_normals(cloud, graph)
    return build_superpoints(with_normals, graph, **kwargs)


def assert_partition(partition, n):
    """The partition property: every point in exactly one superpoint."""
    assert partition.assignment.shape == (n,)
    seen = np.zeros(n, dtype=int)
    for sid, members in enumerate(partition.superpoint_members):
        assert members.size > 0
        assert (partition.assignment[members] == sid).all()
        seen[members] += 1
    assert (seen == 1).all()
    if n:
        assert partition.assignment.min() >= 0
        assert partition.assignment.max() == partition.size - 1


class TestSuperpointPartition:
    def test_from_assignment_round_trip(self):
        assignment = np.array([0, 1, 0, 2, 1], dtype=np.int32)
        part = SuperpointPartition.from_assignment(assignment)
        assert part.size == 3
        assert part.superpoint_members[0].tolist() == [0, 2]
        assert part.superpoint_members[1].tolist() == [1, 4]
        assert part.superpoint_members[2].tolist() == [3]
        assert_partition(part, 5)

    def test_invariants_enforced(self):
        with pytest.raises(ValueError, match="out of range"):
            SuperpointPartition(np.array([0, 5], dtype=np.int32),
                                [np.array([0, 1])])
        with pytest.raises(ValueError, match="empty"):
            SuperpointPartition(np.array([0, 0], dtype=np.int32),
                                [np.array([0, 1]), np.array([], dtype=int)])
        with pytest.raises(ValueError, match="disagree"):
            SuperpointPartition(np.array([0, 1], dtype=np.int32),
                                [np.array([0, 1]), np.array([1])])
        with pytest.raises(ValueError, match="no superpoints"):
            SuperpointPartition(np.array([0], dtype=np.int32), [])

    def test_gap_in_ids_rejected(self):
        # id 1 unused: from_assignment would build an empty member list
        with pytest.raises(ValueError, match="empty"):
            SuperpointPartition.from_assignment(np.array([0, 2], dtype=np.int32))


class TestBuildSuperpoints:
    def test_two_separated_patches(self, rng):
        # flat horizontal squares at z = -1 and z = +1; the centroid sits
        # between them, so the outward flip gives each patch uniform normals
        a = np.stack([rng.uniform(0, 1, 30), rng.uniform(0, 1, 30),
                      np.full(30, -1.0)], axis=1)
        b = a + [0.0, 0.0, 2.0]
        pos = np.concatenate([a, b])
        colors = np.full((60, 3), 100, dtype=np.uint8)
        part = build_for(PointCloud(pos, colors), k=5)
        assert part.size == 2
        # ids ascend with the smallest member index
        assert part.assignment[0] == 0
        assert part.assignment[30] == 1
        assert (part.assignment[:30] == 0).all()
        assert (part.assignment[30:] == 1).all()

    def test_color_gate_splits_a_strip(self):
        # one flat strip, hard color change halfway: two components
        x = np.linspace(0, 1, 40)
        pos = np.stack([x, np.zeros(40), np.zeros(40)], axis=1)
        pos = np.concatenate([pos, pos + [0, 0.02, 0]])  # 2 rows, planar
        colors = np.zeros((80, 3), dtype=np.uint8)
        colors[(np.arange(80) % 40) >= 20] = 200
        part = build_for(PointCloud(pos, colors), k=4,
                         color_dist=30.0, min_size=2)
        assert part.size == 2
        assert superpoint_purity(
            part, (np.arange(80) % 40 >= 20).astype(int)) == 1.0

    def test_color_within_threshold_keeps_one_component(self):
        x = np.linspace(0, 1, 40)
        pos = np.stack([x, np.zeros(40), np.zeros(40)], axis=1)
        pos = np.concatenate([pos, pos + [0, 0.02, 0]])
        colors = np.zeros((80, 3), dtype=np.uint8)
        colors[(np.arange(80) % 40) >= 20] = 20  # distance 20*sqrt(3) < 36
        part = build_for(PointCloud(pos, colors), k=4,
                         color_dist=36.0, min_size=2)
        assert part.size == 1

    def test_normal_gate_splits_a_right_angle(self, rng):
        # hand-set normals remove PCA noise: floor and wall touch at the
        # crease, so only the 90 degree normal jump separates them
        floor = np.stack([rng.uniform(-1, 0, 300), rng.uniform(0, 1, 300),
                          np.zeros(300)], axis=1)
        wall = np.stack([np.zeros(300), rng.uniform(0, 1, 300),
                         rng.uniform(0, 1, 300)], axis=1)
        pos = np.concatenate([floor, wall])
        normals = np.concatenate([np.tile([0.0, 0.0, 1.0], (300, 1)),
                                  np.tile([-1.0, 0.0, 0.0], (300, 1))])
        colors = np.full((600, 3), 50, dtype=np.uint8)
        cloud = PointCloud(pos, colors, normals=normals)
        part = build_superpoints(cloud, knn(cloud, 8),
                                 normal_angle_deg=30.0, min_size=5)
        gt = np.concatenate([np.zeros(300, int), np.ones(300, int)])
        assert part.size == 2
        assert superpoint_purity(part, gt) == 1.0

    def test_angle_inside_threshold_keeps_one_component(self, rng):
        # two half strips whose normals differ by 29 degrees: edges survive
        pos = np.stack([rng.uniform(-1, 1, 200), rng.uniform(0, 1, 200),
                        np.zeros(200)], axis=1)
        theta = np.radians(29.0)
        tilted = np.array([np.sin(theta), 0.0, np.cos(theta)])
        normals = np.where((pos[:, 0] < 0)[:, None], [0.0, 0.0, 1.0], tilted)
        colors = np.full((200, 3), 50, dtype=np.uint8)
        cloud = PointCloud(pos, colors, normals=normals)
        part = build_superpoints(cloud, knn(cloud, 8),
                                 normal_angle_deg=30.0, min_size=5)
        assert part.size == 1

    def test_small_fragments_are_absorbed(self, rng):
        # a flat patch with 3 adjacent odd-colored points; the color gate cuts
        # them into a fragment below min_size, the merge folds them back in.
        # One anchor point above keeps the patch normals uniformly oriented.
        pos = np.stack([rng.uniform(0, 1, 49), rng.uniform(0, 1, 49),
                        np.zeros(49)], axis=1)
        pos[:3] = [[0.5, 0.5, 0.0], [0.52, 0.5, 0.0], [0.5, 0.52, 0.0]]
        pos = np.concatenate([pos, [[0.5, 0.5, 5.0]]])
        colors = np.full((50, 3), 100, dtype=np.uint8)
        colors[:3] = 220  # color-gated away from the rest
        part = build_for(PointCloud(pos, colors), k=6, min_size=5)
        assert part.size == 1  # merged back despite the color cut

    def test_distant_fragment_merges_through_knn_contacts(self, rng):
        # kNN adjacency has no distance cutoff, so even a far-away pair has
        # contact edges into the main patch and gets absorbed
        a = np.stack([rng.uniform(0, 1, 30), rng.uniform(0, 1, 30),
                      np.zeros(30)], axis=1)
        b = np.array([[50.0, 0, 0], [50.0, 0, 0.01]])
        pos = np.concatenate([a, b])
        colors = np.full((32, 3), 100, dtype=np.uint8)
        part = build_for(PointCloud(pos, colors), k=5, min_size=5)
        assert part.size == 1

    def test_whole_cloud_below_min_size_survives(self, rng):
        # nothing to merge into: the lone undersized component is kept
        cloud = random_cloud(rng, 4)
        part = build_for(cloud, k=3, min_size=10)
        assert part.size >= 1
        assert sum(m.size for m in part.superpoint_members) == 4

    def test_min_size_one_keeps_everything(self, rng):
        cloud = random_cloud(rng, 40)
        graph = knn(cloud, 5)
        cn = estimate_normals(cloud, graph)
        loose = build_superpoints(cn, graph, min_size=1)
        merged = build_superpoints(cn, graph, min_size=5)
        assert loose.size >= merged.size

    def test_validation(self, rng):
        cloud = random_cloud(rng, 20)
        graph = knn(cloud, 5)
        with pytest.raises(ValueError, match="normals"):
            build_superpoints(cloud, graph)
        cn = estimate_normals(cloud, graph)
        with pytest.raises(ValueError, match="min_size"):
            build_superpoints(cn, graph, min_size=0)
        other = knn(random_cloud(rng, 10), 3)
        with pytest.raises(ValueError, match="does not match"):
            build_superpoints(cn, other)

    def test_fuzz_partition_property(self, rng):
        for _ in range(100):
            n = int(rng.integers(5, 60))
            k = int(rng.integers(3, 9))
            min_size = int(rng.integers(1, 7))
            cloud = random_cloud(rng, n)
            part = build_for(cloud, k=min(k, n - 1),
                             min_size=min_size)
            assert_partition(part, n)

    def test_deterministic(self, rng):
        cloud = random_cloud(rng, 80)
        a = build_for(cloud, k=6)
        b = build_for(cloud, k=6)
        assert np.array_equal(a.assignment, b.assignment)


class TestPurity:
    def test_hand_value(self):
        part = SuperpointPartition.from_assignment(
            np.array([0, 0, 0, 1, 1], dtype=np.int32))
        gt = np.array([2, 2, 9, 4, 4])
        # sp0 majority 2 of 3, sp1 majority 2 of 2
        assert superpoint_purity(part, gt) == pytest.approx(4 / 5)

    def test_perfect_when_aligned(self):
        part = SuperpointPartition.from_assignment(
            np.array([0, 1, 0], dtype=np.int32))
        assert superpoint_purity(part, np.array([5, 6, 5])) == 1.0

    def test_shape_checked(self):
        part = SuperpointPartition.from_assignment(np.zeros(3, dtype=np.int32))
        with pytest.raises(ValueError, match="length"):
            superpoint_purity(part, np.zeros(4))

    @pytest.mark.parametrize("shape", ["two_part_cylinder", "lidded_pot",
                                       "four_leg_chair"])
    def test_synthetic_shapes_are_pure(self, shape):
        cloud = make_shape(shape, 3000, seed=0)
        graph = knn(cloud, 10)
        part = build_superpoints(estimate_normals(cloud, graph), graph)
        assert_partition(part, cloud.n)
        assert superpoint_purity(part, cloud.labels) >= 0.95
