"""Object-category matching between crop embeddings and text embeddings.

Scores are scaled cosine similarities turned into probabilities per object;
predictions under the probability threshold are rejected. Image and text
rows can first be projected into a shared low-rank space (joint SVD over the
stacked rows, one V_k for both modalities) to strip redundant directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .latent import svd
from .localize import LocalizedObject
from .prompts import Vocabulary, DEFAULT_TEMPLATE
from .runtime import ImageTensor, ModelHandle, preprocess_image, run_embedding
from .text_embed import l2_normalize_rows

REJECTED = "REJECTED"
EMBED_DIM = 512
AUTO_K_LIMIT = 256
SVD_FITS = ("joint", "per-modality")


@dataclass
class EmbeddingBatch:
    image_rows: np.ndarray          # (m, d) L2-normalized
    text_rows: np.ndarray           # (C+1, d) L2-normalized
    category_names: list[str]


@dataclass
class MatchConfig:
    use_svd: bool = False
    k_latent: int | None = None     # None = auto (category count, capped)
    theta: float = 0.3
    logit_scale: float = 100.0
    template: str = DEFAULT_TEMPLATE
    svd_fit: str = "joint"

    def resolve_k(self, num_rows: int, dim: int) -> int:
        n_cats = num_rows
        if self.k_latent is not None:
            if not 1 <= self.k_latent <= EMBED_DIM:
                raise ValueError(f"k_latent={self.k_latent} out of range [1, {EMBED_DIM}]")
            return self.k_latent
        return n_cats if n_cats <= AUTO_K_LIMIT else dim


@dataclass
class Prediction:
    object_ref: int
    probs: np.ndarray
    label: str
    max_prob: float
    cluster_id: int | None = None
    bbox: tuple[int, int, int, int] | None = None

    def to_dict(self, verbose: bool = False) -> dict:
        out = {
            "object": self.object_ref,
            "bbox": list(self.bbox) if self.bbox is not None else None,
            "cluster_id": self.cluster_id,
            "label": self.label,
            "max_prob": round(float(self.max_prob), 6),
        }
        if verbose:
            out["probs"] = [round(float(p), 6) for p in self.probs]
        return out


def embed_objects(handle: ModelHandle, objects: list[LocalizedObject]) -> np.ndarray:
    """One L2-normalized embedding row per localized object, in input order."""
    if not objects:
        return np.zeros((0, EMBED_DIM), dtype=np.float32)
    rows = []
    for obj in objects:
        tensor = preprocess_image(obj.crop, handle.input_spec)
        rows.append(run_embedding(handle, tensor))
    return l2_normalize_rows(np.stack(rows))


def joint_svd_project(batch: EmbeddingBatch, k: int, fit: str = "joint") -> EmbeddingBatch:
    """Project both modalities to k dims and re-normalize rows.

    "joint" stacks text rows above image rows and shares one V_k across both
    modalities; "per-modality" fits and projects each matrix independently.
    """
    if fit not in SVD_FITS:
        raise ValueError(f"svd_fit must be one of {SVD_FITS}")
    dim = batch.text_rows.shape[1]
    if not 1 <= k <= dim:
        raise ValueError(f"k={k} out of range [1, {dim}]")
    if fit == "joint":
        stacked = np.vstack([batch.text_rows, batch.image_rows])
        kk = min(k, min(stacked.shape))
        _, _, v = svd(stacked)
        text = batch.text_rows @ v[:, :kk]
        image = batch.image_rows @ v[:, :kk]
    else:
        kt = min(k, min(batch.text_rows.shape))
        _, _, vt = svd(batch.text_rows)
        text = batch.text_rows @ vt[:, :kt]
        if len(batch.image_rows):
            ki = min(k, min(batch.image_rows.shape))
            _, _, vi = svd(batch.image_rows)
            image = batch.image_rows @ vi[:, :ki]
        else:
            image = np.zeros((0, kt), dtype=np.float32)
    return EmbeddingBatch(
        image_rows=l2_normalize_rows(image),
        text_rows=l2_normalize_rows(text),
        category_names=list(batch.category_names),
    )


def softmax(scores: np.ndarray) -> np.ndarray:
    """Max-shifted softmax along the last axis."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("softmax of empty input")
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def match(batch: EmbeddingBatch, cfg: MatchConfig,
          objects: list[LocalizedObject] | None = None) -> list[Prediction]:
    """Assign each image row a category by scaled-cosine softmax with rejection."""
    if batch.image_rows.shape[1] != batch.text_rows.shape[1]:
        raise ValueError(f"dimension mismatch: image rows {batch.image_rows.shape[1]}, "
                         f"text rows {batch.text_rows.shape[1]}")
    preds: list[Prediction] = []
    if len(batch.image_rows) == 0:
        return preds
    cosines = batch.image_rows @ batch.text_rows.T  # rows are unit-norm
    probs = softmax(cfg.logit_scale * cosines)
    for i, p in enumerate(probs):
        best = int(np.argmax(p))
        max_prob = float(p[best])
        label = batch.category_names[best] if max_prob >= cfg.theta else REJECTED
        obj = objects[i] if objects else None
        preds.append(Prediction(
            object_ref=i, probs=p, label=label, max_prob=max_prob,
            cluster_id=obj.cluster_id if obj else None,
            bbox=obj.bbox if obj else None,
        ))
    return preds


def match_objects(image_rows: np.ndarray, text_rows: np.ndarray, vocab: Vocabulary,
                  cfg: MatchConfig, objects: list[LocalizedObject] | None = None
                  ) -> list[Prediction]:
    """Optional shared-space projection followed by matching."""
    batch = EmbeddingBatch(image_rows=image_rows, text_rows=text_rows,
                           category_names=vocab.names)
    if cfg.use_svd:
        k = cfg.resolve_k(num_rows=len(vocab.names), dim=text_rows.shape[1])
        batch = joint_svd_project(batch, k, fit=cfg.svd_fit)
    return match(batch, cfg, objects=objects)
