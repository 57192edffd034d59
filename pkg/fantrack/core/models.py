from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np


class Modality(str, Enum):
    JOINT = "joint"
    CONTOUR = "contour"


class Weighting(str, Enum):
    MIXTURE = "mixture"
    GAUSSIAN = "gaussian"


class ResetPolicy(str, Enum):
    RESET_5CM5DEG = "reset_5cm5deg"
    NO_RESET = "no_reset"


class VariantKind(str, Enum):
    REGULAR = "regular"
    NOISE = "noise"
    LIGHT = "light"
    OCCLUSION = "occlusion"


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle, ``x``/``y`` inclusive, width/height in pixels."""

    x: int
    y: int
    width: int
    height: int

    @property
    def x1(self) -> int:
        return self.x + self.width

    @property
    def y1(self) -> int:
        return self.y + self.height

    @property
    def is_empty(self) -> bool:
        return self.width <= 0 or self.height <= 0

    @property
    def slices(self) -> Tuple[slice, slice]:
        """Row/column slices selecting the rectangle from an image array."""
        return slice(self.y, self.y1), slice(self.x, self.x1)

    def contains(self, px: float, py: float) -> bool:
        """True when a continuous pixel position can be sampled inside the rect."""
        return self.x <= px <= self.x1 - 1 and self.y <= py <= self.y1 - 1

    def contains_rect(self, other: "Rect") -> bool:
        return (
            self.x <= other.x
            and self.y <= other.y
            and other.x1 <= self.x1
            and other.y1 <= self.y1
        )

    def expand(self, margin: int) -> "Rect":
        return Rect(self.x - margin, self.y - margin, self.width + 2 * margin, self.height + 2 * margin)

    def clip(self, width: int, height: int) -> "Rect":
        x0 = min(max(self.x, 0), width)
        y0 = min(max(self.y, 0), height)
        x1 = min(max(self.x1, 0), width)
        y1 = min(max(self.y1, 0), height)
        return Rect(x0, y0, x1 - x0, y1 - y0)

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "Rect":
        """Tight bounding box of the true pixels of a boolean image."""
        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        if rows.size == 0:
            return cls(0, 0, 0, 0)
        return cls(int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1))

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, data: dict) -> "Rect":
        return cls(int(data["x"]), int(data["y"]), int(data["width"]), int(data["height"]))
