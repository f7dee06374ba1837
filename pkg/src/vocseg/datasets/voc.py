"""PASCAL VOC segmentation loader (palette PNG class masks).

Palette index 0 is background, 255 is ignore, 1..20 map to the bundled
class-index table. Ground truth is class-level: one binary mask per class
present in the annotation.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image

from ..metrics import MaskSet
from ..prompts import Category, Vocabulary
from .common import CanonicalDataset, DatasetSample

IGNORE_INDEX = 255


def _load_class_table() -> list[str]:
    text = resources.files("vocseg.data").joinpath("voc_classes.txt").read_text()
    return [line for line in text.splitlines() if line]


VOC_CLASSES = _load_class_table()

_IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png")


def _find_image(image_dir: Path, stem: str) -> Path | None:
    for suffix in _IMAGE_SUFFIXES:
        candidate = image_dir / f"{stem}{suffix}"
        if candidate.exists():
            return candidate
    return None


def load_voc(image_dir: str | Path, seg_dir: str | Path,
             limit: int | None = None) -> CanonicalDataset:
    """Pair segmentation PNGs with their images and split them per class."""
    image_dir, seg_dir = Path(image_dir), Path(seg_dir)
    vocab = Vocabulary(categories=[Category(name=n) for n in VOC_CLASSES],
                       includes_open_set=True)
    samples = []
    for seg_path in sorted(seg_dir.glob("*.png")):
        if limit is not None and len(samples) >= limit:
            break
        img = Image.open(seg_path)
        if img.mode not in ("P", "L"):
            raise ValueError(f"{seg_path}: expected a palette/indexed mask, got mode {img.mode}")
        idx = np.asarray(img, dtype=np.int32)
        image_path = _find_image(image_dir, seg_path.stem)
        if image_path is None:
            raise FileNotFoundError(f"no image for mask {seg_path.name} in {image_dir}")
        ignore = idx == IGNORE_INDEX
        masks, labels = [], []
        for class_idx in sorted(np.unique(idx)):
            if class_idx in (0, IGNORE_INDEX):
                continue
            if not 1 <= class_idx <= len(VOC_CLASSES):
                raise ValueError(f"{seg_path}: palette index {class_idx} out of range")
            masks.append(idx == class_idx)
            labels.append(VOC_CLASSES[class_idx - 1])
        samples.append(DatasetSample(
            image_id=seg_path.stem,
            image_path=image_path,
            gt_masks=MaskSet(masks=masks, labels=labels,
                             ignore=ignore if ignore.any() else None),
            gt_label_set=set(labels),
        ))
    return CanonicalDataset(root=image_dir, samples=samples, vocabulary=vocab, name="voc")
