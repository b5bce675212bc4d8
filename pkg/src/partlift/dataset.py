"""Instruction records, part feature extraction, and manifest files.

A manifest is a JSON array of objects, each naming a PLY file and the list of
segmentation instructions to run against it. Instruction text can be written
by hand or generated from simple geometric features of each labeled part.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import PointCloud

QUERY_TYPES = ("normal", "three_d")

# name -> sRGB center; order breaks ties for nearest-name lookup
NAMED_COLORS = [
    ("red", (255, 0, 0)),
    ("green", (0, 255, 0)),
    ("blue", (0, 0, 255)),
    ("yellow", (255, 255, 0)),
    ("cyan", (0, 255, 255)),
    ("magenta", (255, 0, 255)),
    ("orange", (255, 165, 0)),
    ("purple", (128, 0, 128)),
    ("brown", (139, 69, 19)),
    ("white", (255, 255, 255)),
    ("gray", (128, 128, 128)),
    ("black", (0, 0, 0)),
]


@dataclass(frozen=True)
class InstructionRecord:
    """One segmentation query against one object."""

    query: str
    query_type: str
    category: int
    object_id: str = ""
    gt_mask_ref: str | None = None

    def __post_init__(self):
        if self.query_type not in QUERY_TYPES:
            raise ValueError(f"query_type must be one of {QUERY_TYPES}")
        if not self.query:
            raise ValueError("query must be nonempty")
        if self.category < 0:
            raise ValueError("category must be nonnegative")


@dataclass(frozen=True)
class InstructionTemplate:
    """Format string over the slots {part} {color} {location} {dims} {size_rank}."""

    text: str
    query_type: str


DEFAULT_TEMPLATES = [
    InstructionTemplate("Segment the {part} of the object.", "normal"),
    InstructionTemplate("Highlight the {part}.", "normal"),
    InstructionTemplate("Find the {color} part.", "normal"),
    InstructionTemplate("Which pixels belong to the {part}? Mark them.", "normal"),
    InstructionTemplate("Please segment the {color} {part}.", "normal"),
    InstructionTemplate(
        "Segment the {color} part located at the {location} of the object.",
        "three_d"),
    InstructionTemplate(
        "Find the part near the {location}, roughly {dims} in extent.",
        "three_d"),
    InstructionTemplate(
        "Mark the {size_rank} part; it sits at the {location}.", "three_d"),
    InstructionTemplate(
        "Segment the {part}, the {color} region at the {location}.", "three_d"),
    InstructionTemplate(
        "Highlight the {size_rank} part of the object, colored {color}.",
        "three_d"),
]


@dataclass(frozen=True)
class PartFeatures:
    """Geometric and color summary of one labeled part."""

    dominant_color: tuple[int, int, int]
    color_name: str
    extent: tuple[float, float, float]
    relative_position: frozenset[str]
    size_rank: int


def nearest_color_name(rgb) -> str:
    """Closest entry of NAMED_COLORS by Euclidean distance; ties keep list order."""
    rgb = np.asarray(rgb, dtype=np.float64)
    best, best_d = None, None
    for name, center in NAMED_COLORS:
        d = float(np.sum((rgb - np.asarray(center, dtype=np.float64)) ** 2))
        if best_d is None or d < best_d:
            best, best_d = name, d
    return best


def _dominant_color(colors: np.ndarray) -> tuple[int, int, int]:
    # mode over 32-level bins, then average the member colors of the modal bin
    bins = colors // 8
    uniq, counts = np.unique(bins, axis=0, return_counts=True)
    modal = uniq[int(np.argmax(counts))]
    members = np.all(bins == modal, axis=1)
    mean = colors[members].astype(np.float64).mean(axis=0)
    return tuple(int(round(c)) for c in mean)


def extract_part_features(cloud: PointCloud, category: int) -> PartFeatures:
    """Summarize the points labeled `category`: color, extent, placement, rank.

    relative_position compares the part centroid to the object centroid per
    axis, with a dead zone of ten percent of the object extent on that axis:
    x gives left/right, y gives front/back, z gives bottom/top. A part inside
    every dead zone is {"center"}. size_rank orders all labeled parts by
    bounding-box volume, largest first, ties broken by category id.
    """
    if cloud.labels is None:
        raise ValueError("extract_part_features requires labels")
    member = cloud.labels == category
    if not member.any():
        raise ValueError(f"category {category} has no points")

    dominant = _dominant_color(cloud.colors[member])
    pos = cloud.positions[member]
    lo, hi = pos.min(axis=0), pos.max(axis=0)
    extent = tuple(float(e) for e in hi - lo)

    obj_lo = cloud.positions.min(axis=0)
    obj_hi = cloud.positions.max(axis=0)
    dead = 0.1 * (obj_hi - obj_lo)
    delta = pos.mean(axis=0) - cloud.centroid
    words = set()
    axis_words = [("left", "right"), ("front", "back"), ("bottom", "top")]
    for axis, (low_word, high_word) in enumerate(axis_words):
        if delta[axis] < -dead[axis]:
            words.add(low_word)
        elif delta[axis] > dead[axis]:
            words.add(high_word)
    if not words:
        words.add("center")

    cats = [int(c) for c in np.unique(cloud.labels) if c >= 0]
    volumes = []
    for c in cats:
        p = cloud.positions[cloud.labels == c]
        ext = p.max(axis=0) - p.min(axis=0)
        volumes.append((-float(np.prod(ext)), c))
    volumes.sort()
    rank = 1 + [c for _, c in volumes].index(category)

    return PartFeatures(dominant_color=dominant,
                        color_name=nearest_color_name(dominant),
                        extent=extent,
                        relative_position=frozenset(words),
                        size_rank=rank)


def _ordinal_rank(rank: int) -> str:
    if rank == 1:
        return "largest"
    if rank % 100 in (11, 12, 13):
        suffix = "th"
    else:
        suffix = {1: "st", 2: "nd", 3: "rd"}.get(rank % 10, "th")
    return f"{rank}{suffix} largest"


def generate_instructions(features: PartFeatures, part_name: str,
                          templates: list[InstructionTemplate] | None = None,
                          seed: int = 0, object_id: str = "",
                          category: int = 0,
                          gt_mask_ref: str | None = None) -> list[InstructionRecord]:
    """Fill every template with this part's features, one record per template.

    The location slot picks one of the part's position words with a seeded
    RNG, so output is deterministic per seed. The template list must contain
    both query types and only known slots.
    """
    if templates is None:
        templates = DEFAULT_TEMPLATES
    if not templates:
        raise ValueError("templates must be nonempty")
    types = {t.query_type for t in templates}
    if set(QUERY_TYPES) - types:
        raise ValueError("templates must cover both query types")
    rng = np.random.default_rng(seed)
    locations = sorted(features.relative_position)
    records = []
    for template in templates:
        slots = {
            "part": part_name,
            "color": features.color_name,
            "location": locations[int(rng.integers(len(locations)))],
            "dims": "{:.2f} x {:.2f} x {:.2f}".format(*features.extent),
            "size_rank": _ordinal_rank(features.size_rank),
        }
        try:
            text = template.text.format(**slots)
        except (KeyError, IndexError) as exc:
            raise ValueError(f"template {template.text!r} uses an unknown slot: {exc}")
        records.append(InstructionRecord(query=text,
                                         query_type=template.query_type,
                                         category=category,
                                         object_id=object_id,
                                         gt_mask_ref=gt_mask_ref))
    return records


@dataclass(frozen=True)
class ObjectManifest:
    """One object entry: where the PLY lives and what to ask about it."""

    object_id: str
    object_category: str
    ply_path: str
    instructions: tuple[InstructionRecord, ...] = field(default_factory=tuple)
    label_property: str = "label"

    def __post_init__(self):
        if not self.object_id:
            raise ValueError("object_id must be nonempty")
        object.__setattr__(self, "instructions", tuple(self.instructions))


def save_manifest(manifests: list[ObjectManifest], path) -> None:
    docs = []
    for m in manifests:
        docs.append({
            "object_id": m.object_id,
            "object_category": m.object_category,
            "ply_path": m.ply_path,
            "label_property": m.label_property,
            "instructions": [
                {"query": r.query, "query_type": r.query_type,
                 "category": r.category}
                for r in m.instructions
            ],
        })
    Path(path).write_text(json.dumps(docs, indent=2) + "\n", encoding="utf-8")


def load_manifest(path) -> list[ObjectManifest]:
    """Parse a manifest file; relative ply_path entries resolve against it."""
    path = Path(path)
    try:
        docs = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read manifest {path}: {exc}") from exc
    if not isinstance(docs, list):
        raise ValueError("manifest must be a JSON array of objects")
    out = []
    for doc in docs:
        try:
            ply_path = doc["ply_path"]
            if not Path(ply_path).is_absolute():
                ply_path = str((path.parent / ply_path).resolve())
            records = tuple(
                InstructionRecord(query=r["query"], query_type=r["query_type"],
                                  category=int(r["category"]),
                                  object_id=doc["object_id"])
                for r in doc.get("instructions", ()))
            out.append(ObjectManifest(object_id=doc["object_id"],
                                      object_category=doc["object_category"],
                                      ply_path=ply_path,
                                      instructions=records,
                                      label_property=doc.get("label_property",
                                                             "label")))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed manifest entry: {exc}") from exc
    return out
