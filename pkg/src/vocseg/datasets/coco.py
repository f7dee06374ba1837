"""COCO instance-annotation loader.

Supports polygon and uncompressed-RLE segmentations; compressed RLE is
rejected with the offending annotation id. Crowd annotations are skipped.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..metrics import MaskSet
from ..prompts import Category, Vocabulary
from .common import CanonicalDataset, DatasetSample, rasterize_polygon


def decode_uncompressed_rle(counts: list[int], h: int, w: int) -> np.ndarray:
    """Column-major run-length decode, runs alternating background/foreground."""
    counts = [int(c) for c in counts]
    if any(c < 0 for c in counts):
        raise ValueError("RLE counts must be non-negative")
    if sum(counts) != h * w:
        raise ValueError(f"RLE counts sum to {sum(counts)}, expected {h}*{w}={h * w}")
    flat = np.zeros(h * w, dtype=bool)
    pos = 0
    value = False
    for c in counts:
        if value:
            flat[pos:pos + c] = True
        pos += c
        value = not value
    return flat.reshape(w, h).T  # column-major order


def _annotation_mask(ann: dict, h: int, w: int) -> np.ndarray:
    seg = ann.get("segmentation")
    if isinstance(seg, list):
        mask = np.zeros((h, w), dtype=bool)
        for poly in seg:
            mask |= rasterize_polygon(poly, h, w)
        return mask
    if isinstance(seg, dict):
        counts = seg.get("counts")
        if isinstance(counts, list):
            sh, sw = seg.get("size", (h, w))
            return decode_uncompressed_rle(counts, sh, sw)
        raise ValueError(
            f"annotation {ann.get('id')}: compressed RLE segmentation is unsupported")
    raise ValueError(f"annotation {ann.get('id')}: unknown segmentation encoding")


def load_coco(annotation_json: str | Path, image_dir: str | Path,
              limit: int | None = None, merge_per_class: bool = False) -> CanonicalDataset:
    """Load a COCO-style instances file into the canonical in-memory form."""
    annotation_json = Path(annotation_json)
    image_dir = Path(image_dir)
    try:
        data = json.loads(annotation_json.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{annotation_json} is not valid JSON: {exc}") from exc
    for key in ("images", "annotations", "categories"):
        if key not in data:
            raise ValueError(f"{annotation_json} missing '{key}' array")

    categories = sorted(data["categories"], key=lambda c: c["id"])
    cat_names = {c["id"]: c["name"] for c in categories}
    vocab = Vocabulary(
        categories=[Category(name=c["name"], super_category=c.get("supercategory"))
                    for c in categories],
        includes_open_set=True,
    )

    by_image: dict[int, list[dict]] = {}
    for ann in data["annotations"]:
        if ann.get("iscrowd"):
            continue
        by_image.setdefault(ann["image_id"], []).append(ann)

    samples = []
    for img in sorted(data["images"], key=lambda i: i["id"]):
        if limit is not None and len(samples) >= limit:
            break
        h, w = img["height"], img["width"]
        path = image_dir / img["file_name"]
        if not path.exists():
            raise FileNotFoundError(f"image file missing: {path}")
        anns = sorted(by_image.get(img["id"], []), key=lambda a: a.get("id", 0))
        masks, labels = [], []
        for ann in anns:
            masks.append(_annotation_mask(ann, h, w))
            labels.append(cat_names[ann["category_id"]])
        if merge_per_class:
            merged: dict[str, np.ndarray] = {}
            for m, lbl in zip(masks, labels):
                merged[lbl] = merged.get(lbl, np.zeros((h, w), dtype=bool)) | m
            labels = sorted(merged)
            masks = [merged[lbl] for lbl in labels]
        samples.append(DatasetSample(
            image_id=str(img["id"]),
            image_path=path,
            gt_masks=MaskSet(masks=masks, labels=labels),
            gt_label_set=set(labels),
        ))
    return CanonicalDataset(root=image_dir, samples=samples, vocabulary=vocab, name="coco")
