"""Shared fixtures: small random clouds and fabricated render views."""

from __future__ import annotations

import numpy as np
import pytest

from partlift import PointCloud, SuperpointPartition, ViewRender


def random_cloud(rng: np.random.Generator, n: int, labels: bool = False,
                 spread: float = 1.0) -> PointCloud:
    positions = rng.uniform(-spread, spread, size=(n, 3))
    colors = rng.integers(0, 256, size=(n, 3), dtype=np.int64).astype(np.uint8)
    lab = rng.integers(0, 4, size=n).astype(np.int32) if labels else None
    return PointCloud(positions=positions, colors=colors, labels=lab)


def fabricate_view(rng: np.random.Generator, n_points: int, width: int,
                   height: int, view_index: int = 0) -> ViewRender:
    """A synthetic ViewRender with consistent visibility and pixel buffers.

    Points are either projected somewhere inside the image (and then visible
    with probability 0.6, occluded otherwise) or off-frame with -1 pixels.
    Image/depth/point_index carry correct shapes but no physical meaning.
    """
    on_frame = rng.random(n_points) < 0.8
    px = np.where(on_frame, rng.integers(0, width, n_points), -1).astype(np.int32)
    py = np.where(on_frame, rng.integers(0, height, n_points), -1).astype(np.int32)
    visible = on_frame & (rng.random(n_points) < 0.6)
    return ViewRender(
        view_index=view_index,
        image=np.full((height, width, 3), 255, dtype=np.uint8),
        depth=np.full((height, width), np.inf, dtype=np.float64),
        point_index=np.full((height, width), -1, dtype=np.int32),
        visible=visible,
        pixel_x=px,
        pixel_y=py,
    )


def random_partition(rng: np.random.Generator, n_points: int,
                     max_superpoints: int) -> SuperpointPartition:
    raw = rng.integers(0, max_superpoints, size=n_points)
    _, contiguous = np.unique(raw, return_inverse=True)
    return SuperpointPartition.from_assignment(contiguous.astype(np.int32))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
