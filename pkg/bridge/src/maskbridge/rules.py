"""Color-threshold heuristic: the deterministic stand-in for a real model.

A rule table maps color names to RGB centers; a pixel belongs to the mask
when its Euclidean RGB distance to the center of the instruction's first
color word is at most that color's radius. Pure functions throughout, so the
service can run them concurrently without locks.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

REQUIRED_COLORS = frozenset(
    {"red", "green", "blue", "yellow", "white", "black", "gray"})

_WORD = re.compile(r"[a-z]+")


@dataclass(frozen=True)
class HeuristicRule:
    """Color table with per-name radius overrides and a shared default.

    Radii are in 8-bit RGB units and must be positive; the table must cover
    at least REQUIRED_COLORS.
    """

    centers: Mapping[str, tuple[int, int, int]]
    radii: Mapping[str, float] = field(default_factory=dict)
    default_radius: float = 60.0

    def __post_init__(self):
        object.__setattr__(self, "centers", dict(self.centers))
        object.__setattr__(self, "radii", dict(self.radii))
        missing = REQUIRED_COLORS - set(self.centers)
        if missing:
            raise ValueError(f"rule table missing colors: {sorted(missing)}")
        for name, center in self.centers.items():
            if len(center) != 3 or any(not 0 <= c <= 255 for c in center):
                raise ValueError(f"center for {name!r} must be three 8-bit values")
        if self.default_radius <= 0:
            raise ValueError("default_radius must be positive")
        unknown = set(self.radii) - set(self.centers)
        if unknown:
            raise ValueError(f"radius override for unknown color: {sorted(unknown)}")
        if any(r <= 0 for r in self.radii.values()):
            raise ValueError("radii must be positive")

    def radius(self, name: str) -> float:
        return float(self.radii.get(name, self.default_radius))

    def first_color_word(self, instruction: str) -> str | None:
        """The first whole word of the instruction that names a table color."""
        for word in _WORD.findall(instruction.lower()):
            if word in self.centers:
                return word
        return None

    def apply(self, image: np.ndarray, instruction: str):
        """Segment one image; returns (mask, explanation, has_segmentation)."""
        name = self.first_color_word(instruction)
        if name is None:
            mask = np.zeros(image.shape[:2], dtype=bool)
            return mask, "No color word found in the instruction.", False
        center = np.asarray(self.centers[name], dtype=np.float64)
        d2 = np.sum((image.astype(np.float64) - center) ** 2, axis=-1)
        mask = d2 <= self.radius(name) ** 2
        text = (f"Pixels within {self.radius(name):g} RGB units of "
                f"{name} are highlighted.")
        return mask, text, bool(mask.any())


DEFAULT_RULE = HeuristicRule(centers={
    "red": (255, 0, 0),
    "green": (0, 255, 0),
    "blue": (0, 0, 255),
    "yellow": (255, 255, 0),
    "cyan": (0, 255, 255),
    "magenta": (255, 0, 255),
    "orange": (255, 165, 0),
    "purple": (128, 0, 128),
    "brown": (139, 69, 19),
    "white": (255, 255, 255),
    "gray": (128, 128, 128),
    "black": (0, 0, 0),
})


def rle_encode(mask: np.ndarray) -> list[int]:
    """Row-major run lengths alternating false/true, leading false run first.

    The leading run may be zero; every later run is positive; the runs always
    sum to the pixel count. This is the wire format the segmentation client
    decodes, duplicated here so the service has no dependency on the client.
    """
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return []
    breaks = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], breaks, [flat.size]])
    runs = [int(r) for r in np.diff(bounds)]
    if flat[0]:
        runs.insert(0, 0)
    return runs
