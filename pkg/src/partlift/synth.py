"""Procedural labeled point clouds for tests and demos.

Three shapes with known part structure, z up, deterministic per seed:

  * two_part_cylinder: a cylinder split at mid-height into two colored halves.
  * lidded_pot: an open cylindrical body with a floating lid above it; the
    interior and the underside of the lid occlude badly from a single view.
  * four_leg_chair: seat slab, back slab, and four legs below the seat.

Part ids are globally unique across shapes so mixed manifests stay unambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import PointCloud


@dataclass(frozen=True)
class PartSpec:
    category: int
    name: str
    color: tuple[int, int, int]


SHAPE_PARTS: dict[str, list[PartSpec]] = {
    "two_part_cylinder": [
        PartSpec(0, "bottom section", (255, 0, 0)),
        PartSpec(1, "top section", (0, 0, 255)),
    ],
    "lidded_pot": [
        PartSpec(2, "body", (0, 255, 0)),
        PartSpec(3, "lid", (255, 0, 0)),
    ],
    "four_leg_chair": [
        PartSpec(4, "seat", (255, 0, 0)),
        PartSpec(5, "backrest", (0, 0, 255)),
        PartSpec(6, "leg", (0, 255, 0)),
    ],
}

SHAPE_OBJECT_CATEGORY = {
    "two_part_cylinder": "cylinder",
    "lidded_pot": "pot",
    "four_leg_chair": "chair",
}

COLOR_NOISE = 4  # per-channel jitter, small against the superpoint color gate


def _finish(positions, labels, shape_name, rng):
    parts = {p.category: p.color for p in SHAPE_PARTS[shape_name]}
    colors = np.zeros((len(labels), 3), dtype=np.int16)
    for category, color in parts.items():
        colors[labels == category] = color
    noise = rng.integers(-COLOR_NOISE, COLOR_NOISE + 1, size=colors.shape)
    colors = np.clip(colors + noise, 0, 255).astype(np.uint8)
    return PointCloud(positions=np.asarray(positions, dtype=np.float64),
                      colors=colors,
                      labels=np.asarray(labels, dtype=np.int32))


def _cylinder_side(n, radius, z_lo, z_hi, rng):
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    z = rng.uniform(z_lo, z_hi, n)
    return np.stack([radius * np.cos(theta), radius * np.sin(theta), z], axis=1)


def _disc(n, radius, z, rng):
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    return np.stack([r * np.cos(theta), r * np.sin(theta),
                     np.full(n, z)], axis=1)


def _box_surface(n, lo, hi, rng):
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    ext = hi - lo
    # face order: -x, +x, -y, +y, -z, +z
    areas = np.array([ext[1] * ext[2], ext[1] * ext[2],
                      ext[0] * ext[2], ext[0] * ext[2],
                      ext[0] * ext[1], ext[0] * ext[1]])
    face = rng.choice(6, size=n, p=areas / areas.sum())
    u = rng.uniform(0.0, 1.0, n)
    v = rng.uniform(0.0, 1.0, n)
    pts = np.empty((n, 3))
    axis = face // 2          # fixed axis of each face
    side = face % 2           # 0 -> lo face, 1 -> hi face
    for a in range(3):
        others = [b for b in range(3) if b != a]
        rows = axis == a
        pts[rows, a] = np.where(side[rows] == 1, hi[a], lo[a])
        pts[rows, others[0]] = lo[others[0]] + u[rows] * ext[others[0]]
        pts[rows, others[1]] = lo[others[1]] + v[rows] * ext[others[1]]
    return pts


def two_part_cylinder(n_points: int, seed: int = 0) -> PointCloud:
    """Cylinder of radius 0.5, z in [-1, 1]; label 0 below z=0, label 1 above."""
    if n_points < 100:
        raise ValueError("need at least 100 points")
    rng = np.random.default_rng(seed)
    radius, z_lo, z_hi = 0.5, -1.0, 1.0
    side_area = 2.0 * np.pi * radius * (z_hi - z_lo)
    cap_area = np.pi * radius * radius
    total = side_area + 2.0 * cap_area
    n_side = int(round(n_points * side_area / total))
    n_cap = (n_points - n_side) // 2
    pts = np.concatenate([
        _cylinder_side(n_side, radius, z_lo, z_hi, rng),
        _disc(n_cap, radius, z_lo, rng),
        _disc(n_points - n_side - n_cap, radius, z_hi, rng),
    ])
    labels = np.where(pts[:, 2] < 0.0, 0, 1)
    return _finish(pts, labels, "two_part_cylinder", rng)


def lidded_pot(n_points: int, seed: int = 0) -> PointCloud:
    """Pot with an occluded interior (label 2) under a floating lid (label 3).

    The body is an open-bottomed wall with a recessed floor; a ring of flat
    stash discs hangs in the cavity under the floor. From a side view the
    wall hides the floor and the stash completely; views from below see them
    through the open bottom, so single-view runs lose the interior.
    """
    if n_points < 100:
        raise ValueError("need at least 100 points")
    rng = np.random.default_rng(seed)
    wall_r, wall_top = 0.6, 1.0
    floor_r, floor_z = 0.5, 0.3
    lid_z, lid_r = 1.05, 0.68
    knob_r, knob_top = 0.1, 1.25
    stash_r, stash_z = 0.12, 0.18
    # the cavity stash is oversampled so the occluded interior carries a
    # noticeable share of the body points
    fractions = {
        "wall": 0.49, "floor": 0.10, "stash": 0.18, "lid": 0.20, "knob": 0.03,
    }
    counts = {k: int(round(n_points * f)) for k, f in fractions.items()}
    counts["wall"] += n_points - sum(counts.values())
    stash_centers = [(0.33 * np.cos(a), 0.33 * np.sin(a))
                     for a in np.linspace(0.0, 2.0 * np.pi, 6, endpoint=False)]
    per = np.full(6, counts["stash"] // 6)
    per[:counts["stash"] - int(per.sum())] += 1
    pts = np.concatenate(
        [_cylinder_side(counts["wall"], wall_r, 0.0, wall_top, rng),
         _disc(counts["floor"], floor_r, floor_z, rng)]
        + [_disc(c, stash_r, stash_z, rng) + np.array([cx, cy, 0.0])
           for c, (cx, cy) in zip(per, stash_centers)]
        + [_disc(counts["lid"], lid_r, lid_z, rng),
           _cylinder_side(counts["knob"], knob_r, lid_z, knob_top, rng)])
    n_body = counts["wall"] + counts["floor"] + counts["stash"]
    labels = np.concatenate([np.full(n_body, 2),
                             np.full(len(pts) - n_body, 3)])
    cloud = _finish(pts, labels, "lidded_pot", rng)
    # recolor the stash a darker green: still body, but the color gate keeps
    # each sphere its own superpoint so occlusion is not bridged
    colors = np.array(cloud.colors)
    lo = counts["wall"] + counts["floor"]
    stash_rgb = np.array([0, 150, 0], dtype=np.int16)
    noise = rng.integers(-COLOR_NOISE, COLOR_NOISE + 1,
                         size=(counts["stash"], 3))
    colors[lo:lo + counts["stash"]] = np.clip(stash_rgb + noise, 0, 255)
    return PointCloud(positions=cloud.positions, colors=colors.astype(np.uint8),
                      labels=cloud.labels)


def four_leg_chair(n_points: int, seed: int = 0) -> PointCloud:
    """Seat slab (4) with a backrest slab (5) and four legs below the seat (6)."""
    if n_points < 100:
        raise ValueError("need at least 100 points")
    rng = np.random.default_rng(seed)
    # parts are separated by air gaps so no two surfaces coincide and the
    # kNN graph rarely crosses part boundaries
    seat = (np.array([0.0, 0.0, 0.5]), np.array([1.0, 1.0, 0.6]))
    back = (np.array([0.0, 0.92, 0.68]), np.array([1.0, 1.0, 1.6]))
    leg_size = 0.1
    leg_boxes = []
    for x0 in (0.02, 1.0 - leg_size - 0.02):
        for y0 in (0.02, 1.0 - leg_size - 0.02):
            leg_boxes.append((np.array([x0, y0, 0.0]),
                              np.array([x0 + leg_size, y0 + leg_size, 0.44])))

    def box_area(lo, hi):
        e = hi - lo
        return 2.0 * (e[0] * e[1] + e[0] * e[2] + e[1] * e[2])

    boxes = [seat, back] + leg_boxes
    areas = np.array([box_area(lo, hi) for lo, hi in boxes])
    counts = np.floor(n_points * areas / areas.sum()).astype(int)
    counts[0] += n_points - counts.sum()
    pieces = [_box_surface(c, lo, hi, rng)
              for c, (lo, hi) in zip(counts, boxes)]
    pts = np.concatenate(pieces)
    labels = np.concatenate([np.full(counts[0], 4), np.full(counts[1], 5),
                             np.full(counts[2:].sum(), 6)])
    return _finish(pts, labels, "four_leg_chair", rng)


SHAPE_BUILDERS = {
    "two_part_cylinder": two_part_cylinder,
    "lidded_pot": lidded_pot,
    "four_leg_chair": four_leg_chair,
}


def make_shape(name: str, n_points: int, seed: int = 0) -> PointCloud:
    """Build one of the named shapes; unknown names raise ValueError."""
    try:
        builder = SHAPE_BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown shape {name!r}; "
                         f"choose from {sorted(SHAPE_BUILDERS)}") from None
    return builder(n_points, seed)
