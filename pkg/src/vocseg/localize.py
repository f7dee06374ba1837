"""Object localization from cluster masks.

Each cluster mask is cleaned with morphological opening and dilation,
split into 8-connected components, filtered by area, and cropped from the
original image as a bounding-box region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .cluster import SegmentationResult

EIGHT_CONN = np.ones((3, 3), dtype=bool)


@dataclass
class MorphParams:
    opening_se: int = 1          # structuring element half-width
    dilation_se: int = 1
    min_area_fraction: float = 0.001
    min_area_px: int = 50

    def __post_init__(self):
        if self.opening_se < 0 or self.dilation_se < 0:
            raise ValueError("structuring element half-widths must be >= 0")
        if not 0 <= self.min_area_fraction < 1:
            raise ValueError("min_area_fraction must be in [0, 1)")

    def effective_min_area(self, image_size: tuple[int, int]) -> int:
        h, w = image_size
        return max(int(self.min_area_fraction * h * w), self.min_area_px)


@dataclass
class LocalizedObject:
    bbox: tuple[int, int, int, int]  # (x0, y0, x1, y1) inclusive
    area: int
    cluster_id: int
    crop: np.ndarray                 # region of the original image
    component_mask: np.ndarray       # binary mask within the bbox


def _square(half_width: int) -> np.ndarray:
    side = 2 * half_width + 1
    return np.ones((side, side), dtype=bool)


def clean_mask(mask: np.ndarray, p: MorphParams) -> np.ndarray:
    """Opening (erode, dilate) followed by dilation, both with square SEs."""
    out = np.asarray(mask, dtype=bool)
    if p.opening_se > 0:
        se = _square(p.opening_se)
        out = ndimage.binary_erosion(out, structure=se)
        out = ndimage.binary_dilation(out, structure=se)
    if p.dilation_se > 0:
        out = ndimage.binary_dilation(out, structure=_square(p.dilation_se))
    return out


def connected_components(mask: np.ndarray) -> list[tuple[np.ndarray, int, tuple[int, int, int, int]]]:
    """8-connected components as (mask, area, bbox), sorted by descending area."""
    mask = np.asarray(mask, dtype=bool)
    labeled, count = ndimage.label(mask, structure=EIGHT_CONN)
    comps = []
    for idx, sl in enumerate(ndimage.find_objects(labeled), start=1):
        comp = labeled == idx
        area = int(comp.sum())
        y0, y1 = sl[0].start, sl[0].stop - 1
        x0, x1 = sl[1].start, sl[1].stop - 1
        comps.append((comp, area, (x0, y0, x1, y1)))
    comps.sort(key=lambda c: -c[1])  # stable: scan order preserved on ties
    return comps


def extract_objects(image: np.ndarray, seg: SegmentationResult,
                    p: MorphParams | None = None) -> list[LocalizedObject]:
    """Localize objects from every cluster of a segmentation.

    Crops are rectangular regions of the original image; background pixels
    inside the box are kept as-is.
    """
    if p is None:
        p = MorphParams()
    h, w = seg.labels_full.shape
    if image.shape[:2] != (h, w):
        raise ValueError(f"image {image.shape[:2]} does not match masks {(h, w)}")
    min_area = p.effective_min_area((h, w))
    objects: list[LocalizedObject] = []
    for cluster_id in range(seg.k):
        cleaned = clean_mask(seg.masks[cluster_id], p)
        for comp, area, bbox in connected_components(cleaned):
            if area < min_area:
                continue
            x0, y0, x1, y1 = bbox
            objects.append(LocalizedObject(
                bbox=bbox,
                area=area,
                cluster_id=cluster_id,
                crop=image[y0:y1 + 1, x0:x1 + 1].copy(),
                component_mask=comp[y0:y1 + 1, x0:x1 + 1].copy(),
            ))
    return objects
