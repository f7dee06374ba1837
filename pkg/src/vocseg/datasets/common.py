"""Shared dataset types and polygon rasterization."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..metrics import MaskSet
from ..prompts import Vocabulary


@dataclass
class DatasetSample:
    image_id: str
    image_path: Path
    gt_masks: MaskSet
    gt_label_set: set[str] = field(default_factory=set)


@dataclass
class CanonicalDataset:
    root: Path
    samples: list[DatasetSample]
    vocabulary: Vocabulary
    name: str = "dataset"


def rasterize_polygon(coords: list[float], height: int, width: int) -> np.ndarray:
    """Even-odd scanline fill of a flat [x0, y0, x1, y1, ...] polygon.

    A pixel belongs to the mask when its center lies inside the polygon.
    """
    pts = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    mask = np.zeros((height, width), dtype=bool)
    if len(pts) < 3:
        return mask
    x1 = pts[:, 0]
    y1 = pts[:, 1]
    x2 = np.roll(x1, -1)
    y2 = np.roll(y1, -1)
    keep = y1 != y2
    x1, y1, x2, y2 = x1[keep], y1[keep], x2[keep], y2[keep]
    ylo = np.minimum(y1, y2)
    yhi = np.maximum(y1, y2)
    for row in range(height):
        cy = row + 0.5
        hit = (ylo <= cy) & (cy < yhi)  # half-open: vertices count once
        if not hit.any():
            continue
        t = (cy - y1[hit]) / (y2[hit] - y1[hit])
        xs = np.sort(x1[hit] + t * (x2[hit] - x1[hit]))
        for i in range(0, len(xs) - 1, 2):
            lo = int(np.ceil(xs[i] - 0.5))
            hi = int(np.ceil(xs[i + 1] - 0.5))
            if hi > lo:
                mask[row, max(lo, 0):min(hi, width)] = True
    return mask
