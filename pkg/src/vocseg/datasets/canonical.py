"""Canonical dataset format: a `dataset.json` manifest plus 16-bit
instance-id mask PNGs. All external benchmarks can be converted into this
form once and evaluated identically afterwards.

Manifest schema:
    {
      "schema_version": 1,
      "name": "...",
      "vocabulary": {"categories": [{"name", "super_category"}], "includes_open_set"},
      "images": [{"id", "file", "mask", "instances": {"<instance id>": "<label>"}}]
    }
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from ..metrics import MaskSet
from ..prompts import Vocabulary
from .common import CanonicalDataset, DatasetSample

MANIFEST_NAME = "dataset.json"
SCHEMA_VERSION = 1


def load_canonical(root: str | Path) -> CanonicalDataset:
    """Load a canonical dataset; samples keep manifest order."""
    root = Path(root)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.exists():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    vocab = Vocabulary.from_dict(manifest["vocabulary"])
    known_labels = set(vocab.names)
    samples = []
    for entry in manifest["images"]:
        image_path = root / entry["file"]
        if not image_path.exists():
            raise FileNotFoundError(f"image '{entry['id']}': file missing: {image_path}")
        mask_path = root / entry["mask"]
        if not mask_path.exists():
            raise FileNotFoundError(f"image '{entry['id']}': mask missing: {mask_path}")
        ids = np.asarray(Image.open(mask_path), dtype=np.int64)
        instance_map = {int(k): v for k, v in entry["instances"].items()}
        present = [int(v) for v in np.unique(ids) if v != 0]
        unknown = [v for v in present if v not in instance_map]
        if unknown:
            raise ValueError(
                f"image '{entry['id']}': instance id(s) {unknown} present in "
                f"{mask_path.name} but missing from the manifest instance map")
        masks, labels = [], []
        for inst_id in present:
            label = instance_map[inst_id]
            if label not in known_labels:
                raise ValueError(
                    f"image '{entry['id']}': label '{label}' not in the vocabulary")
            masks.append(ids == inst_id)
            labels.append(label)
        samples.append(DatasetSample(
            image_id=str(entry["id"]),
            image_path=image_path,
            gt_masks=MaskSet(masks=masks, labels=labels),
            gt_label_set=set(labels),
        ))
    return CanonicalDataset(root=root, samples=samples, vocabulary=vocab,
                            name=manifest.get("name", "canonical"))


def write_canonical(dataset: CanonicalDataset, dst_root: str | Path,
                    copy_images: bool = True) -> Path:
    """Write an in-memory dataset out in canonical form; returns the manifest path."""
    dst_root = Path(dst_root)
    (dst_root / "images").mkdir(parents=True, exist_ok=True)
    (dst_root / "masks").mkdir(parents=True, exist_ok=True)
    entries = []
    for sample in dataset.samples:
        if sample.gt_masks.masks:
            h, w = sample.gt_masks.masks[0].shape
        else:
            with Image.open(sample.image_path) as im:
                w, h = im.size
        ids = np.zeros((h, w), dtype=np.uint16)
        instances = {}
        for i, (mask, label) in enumerate(
                zip(sample.gt_masks.masks, sample.gt_masks.labels or []), start=1):
            ids[mask] = i  # later instances overwrite earlier ones on overlap
            instances[str(i)] = label
        mask_rel = f"masks/{sample.image_id}.png"
        Image.frombytes("I;16", (w, h), ids.astype("<u2").tobytes()).save(dst_root / mask_rel)
        if copy_images:
            image_rel = f"images/{sample.image_id}{sample.image_path.suffix}"
            (dst_root / image_rel).write_bytes(sample.image_path.read_bytes())
        else:
            image_rel = str(sample.image_path)
        entries.append({
            "id": sample.image_id,
            "file": image_rel,
            "mask": mask_rel,
            "instances": instances,
        })
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "name": dataset.name,
        "vocabulary": dataset.vocabulary.to_dict(),
        "images": entries,
    }
    path = dst_root / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path
