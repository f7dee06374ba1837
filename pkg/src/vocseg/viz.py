"""Artifact rendering: label maps, per-cluster masks, latent maps, overlays."""

from __future__ import annotations

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from .latent import LatentPixelFeatures
from .recognize import Prediction, REJECTED

# fixed palette: spaced hues so neighboring labels stay distinguishable
_BASE_COLORS = [
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
    (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
    (210, 245, 60), (250, 190, 190), (0, 128, 128), (230, 190, 255),
    (170, 110, 40), (255, 250, 200), (128, 0, 0), (170, 255, 195),
]


def palette() -> list[int]:
    flat = []
    for i in range(256):
        r, g, b = _BASE_COLORS[i % len(_BASE_COLORS)]
        shade = 1.0 - 0.35 * (i // len(_BASE_COLORS)) / max(1, 255 // len(_BASE_COLORS))
        flat.extend([int(r * shade), int(g * shade), int(b * shade)])
    return flat


def labels_png(labels: np.ndarray) -> Image.Image:
    img = Image.fromarray(labels.astype(np.uint8), mode="P")
    img.putpalette(palette())
    return img


def mask_png(mask: np.ndarray) -> Image.Image:
    return Image.fromarray((np.asarray(mask, dtype=np.uint8)) * 255, mode="L")


def latent_maps_png(latent: LatentPixelFeatures) -> list[Image.Image]:
    """Each projection column min-max scaled to an 8-bit grayscale map."""
    h, w = latent.grid_shape
    images = []
    for col in latent.projections.T:
        grid = col.reshape(h, w)
        lo, hi = grid.min(), grid.max()
        scale = (grid - lo) / (hi - lo) if hi > lo else np.zeros_like(grid)
        images.append(Image.fromarray((scale * 255).astype(np.uint8), mode="L"))
    return images


def overlay_png(image: np.ndarray, predictions: list[Prediction]) -> Image.Image:
    """Draw labeled bounding boxes over the image; rejected objects are dashed gray."""
    img = Image.fromarray(image).convert("RGB")
    draw = ImageDraw.Draw(img)
    font = ImageFont.load_default()
    for pred in predictions:
        if pred.bbox is None:
            continue
        x0, y0, x1, y1 = pred.bbox
        color = (128, 128, 128) if pred.label == REJECTED else \
            _BASE_COLORS[(pred.cluster_id or 0) % len(_BASE_COLORS)]
        draw.rectangle([x0, y0, x1, y1], outline=color, width=2)
        text = f"{pred.label} {pred.max_prob:.2f}"
        tx, ty = x0 + 2, max(0, y0 - 11)
        bbox = draw.textbbox((tx, ty), text, font=font)
        draw.rectangle(bbox, fill=color)
        draw.text((tx, ty), text, fill=(0, 0, 0), font=font)
    return img
