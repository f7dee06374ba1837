"""End-to-end orchestration: segment, recognize, evaluate.

All stages are pure given (models, image, config), so images can be
processed by any number of workers; reports are folded in sorted image-id
order and hash the effective config so reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import cluster as cluster_mod
from . import latent as latent_mod
from .bpe import BpeTokenizer
from .localize import LocalizedObject, MorphParams, extract_objects
from .metrics import (MaskSet, MetricsReport, aggregate_metrics,
                      classification_metrics, hungarian_miou)
from .prompts import DEFAULT_TEMPLATE, TEMPLATES, Vocabulary
from .recognize import MatchConfig, Prediction, embed_objects, match_objects
from .runtime import ModelHandle, load_model, preprocess_image, run_feature_taps
from .text_embed import embed_vocabulary

log = logging.getLogger("vocseg")

SCHEMA_VERSION = 1

BACKBONE_FILE = "backbone.onnx"
IMAGE_ENCODER_FILE = "clip_image.onnx"
TEXT_ENCODER_FILE = "clip_text.onnx"
BPE_MERGES = "bpe/merges.txt"
BPE_VOCAB = "bpe/vocab.json"


@dataclass
class PipelineConfig:
    mode: str = "OVSRI2"
    template: str = DEFAULT_TEMPLATE
    use_svd: bool = False
    svd_fit: str = "joint"
    theta: float = 0.3
    k_latent: int | None = None     # recognizer shared-space dim; None = auto
    k_clusters: int | None = None   # override the spectrum-derived cluster count
    linkage: str = "ward"
    opening_se: int = 1
    dilation_se: int = 1
    min_area_fraction: float = 0.001
    min_area_px: int = 50
    merge_per_class: bool = False
    logit_scale: float | None = None  # None = model sidecar value
    workers: int = 1                   # no effect on outputs; excluded from hash
    verbose: bool = False

    def __post_init__(self):
        if self.mode not in latent_mod.MODES:
            raise ValueError(f"mode must be one of {latent_mod.MODES}")
        if self.template not in TEMPLATES:
            raise ValueError(f"template must be one of {sorted(TEMPLATES)}")
        if not 0 <= self.theta <= 1:
            raise ValueError("theta must be in [0, 1]")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def morph_params(self) -> MorphParams:
        return MorphParams(opening_se=self.opening_se, dilation_se=self.dilation_se,
                           min_area_fraction=self.min_area_fraction,
                           min_area_px=self.min_area_px)

    def hashed_dict(self) -> dict:
        d = asdict(self)
        d.pop("workers")
        d.pop("verbose")
        return d

    def config_hash(self) -> str:
        payload = json.dumps(self.hashed_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class ModelBundle:
    model_dir: Path
    backbone: ModelHandle
    image_encoder: ModelHandle
    text_encoder: ModelHandle
    tokenizer: BpeTokenizer
    cache_dir: Path | None = None


def load_bundle(model_dir: str | Path, cache_dir: str | Path | None = None) -> ModelBundle:
    """Load the backbone, both encoders and the tokenizer assets."""
    model_dir = Path(model_dir)
    if not model_dir.is_dir():
        raise FileNotFoundError(f"model directory not found: {model_dir}")
    backbone = load_model(model_dir / BACKBONE_FILE)
    image_encoder = load_model(model_dir / IMAGE_ENCODER_FILE)
    text_encoder = load_model(model_dir / TEXT_ENCODER_FILE)
    tokenizer = BpeTokenizer(model_dir / BPE_MERGES, model_dir / BPE_VOCAB)
    if cache_dir is None:
        cache_dir = model_dir / "cache"
    return ModelBundle(model_dir=model_dir, backbone=backbone,
                       image_encoder=image_encoder, text_encoder=text_encoder,
                       tokenizer=tokenizer, cache_dir=Path(cache_dir))


def load_image(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


@dataclass
class SegmentOutput:
    seg: cluster_mod.SegmentationResult
    latent: latent_mod.LatentPixelFeatures


def segment_image(bundle: ModelBundle, image: np.ndarray,
                  cfg: PipelineConfig) -> SegmentOutput:
    """Backbone taps -> latent features -> clustering -> image-resolution masks."""
    tensor = preprocess_image(image, bundle.backbone.input_spec)
    stack = run_feature_taps(bundle.backbone, tensor)
    feats = latent_mod.compute_latent(stack, cfg.mode, k_override=cfg.k_clusters)
    k = max(feats.projections.shape[1], 2)  # latent dim doubles as cluster count
    labels = cluster_mod.cluster(feats.projections, k, linkage=cfg.linkage)
    seg = cluster_mod.labels_to_masks(labels, feats.grid_shape, image.shape[:2],
                                      k=k, mode=cfg.mode)
    return SegmentOutput(seg=seg, latent=feats)


def match_config(bundle: ModelBundle, cfg: PipelineConfig) -> MatchConfig:
    scale = cfg.logit_scale
    if scale is None:
        scale = bundle.image_encoder.logit_scale or 100.0
    return MatchConfig(use_svd=cfg.use_svd, k_latent=cfg.k_latent, theta=cfg.theta,
                       logit_scale=float(scale), template=cfg.template,
                       svd_fit=cfg.svd_fit)


@dataclass
class RecognizeOutput:
    predictions: list[Prediction]
    objects: list[LocalizedObject]
    segment: SegmentOutput


def recognize_image(bundle: ModelBundle, image: np.ndarray, vocab: Vocabulary,
                    cfg: PipelineConfig,
                    text_rows: np.ndarray | None = None) -> RecognizeOutput:
    """Full per-image pass: segment, localize, embed, match."""
    seg_out = segment_image(bundle, image, cfg)
    objects = extract_objects(image, seg_out.seg, cfg.morph_params())
    if text_rows is None:
        text_rows = embed_vocabulary(bundle.text_encoder, bundle.tokenizer, vocab,
                                     cfg.template, cache_dir=bundle.cache_dir)
    image_rows = embed_objects(bundle.image_encoder, objects)
    preds = match_objects(image_rows, text_rows, vocab, match_config(bundle, cfg),
                          objects=objects)
    return RecognizeOutput(predictions=preds, objects=objects, segment=seg_out)


def predictions_payload(preds: list[Prediction], cfg: PipelineConfig,
                        image_id: str) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "image_id": image_id,
        "mode": cfg.mode,
        "template": cfg.template,
        "theta": cfg.theta,
        "use_svd": cfg.use_svd,
        "config_hash": cfg.config_hash(),
        "objects": [p.to_dict(verbose=cfg.verbose) for p in preds],
    }


def spectrum_payload(out: SegmentOutput, cfg: PipelineConfig, image_id: str) -> dict:
    spec = out.latent.spectrum.to_dict()
    return {
        "schema_version": SCHEMA_VERSION,
        "image_id": image_id,
        "mode": cfg.mode,
        "config_hash": cfg.config_hash(),
        "grid": list(out.latent.grid_shape),
        "k": out.seg.k,
        **spec,
    }


def _evaluate_sample(bundle, sample, vocab, cfg, text_rows) -> dict:
    start = time.perf_counter()
    image = load_image(sample.image_path)
    out = recognize_image(bundle, image, vocab, cfg, text_rows=text_rows)
    pred_set = MaskSet(masks=list(out.segment.seg.masks), ignore=sample.gt_masks.ignore)
    gt_set = MaskSet(masks=sample.gt_masks.masks, labels=sample.gt_masks.labels,
                     ignore=sample.gt_masks.ignore)
    report = classification_metrics(out.predictions, sample.gt_label_set)
    report.hiou = hungarian_miou(pred_set, gt_set)
    elapsed = time.perf_counter() - start
    log.info("image %s: hiou=%.4f objects=%d (%.2fs)",
             sample.image_id, report.hiou, len(out.predictions), elapsed)
    return {
        "id": sample.image_id,
        "hiou": round(report.hiou, 6),
        "objects": [p.to_dict(verbose=cfg.verbose) for p in out.predictions],
        **{k: round(getattr(report, k), 6)
           for k in ("precision", "recall", "f1", "ap", "accuracy")},
        "_report": report,
    }


def evaluate_dataset(bundle: ModelBundle, dataset, cfg: PipelineConfig) -> dict:
    """Per-image records plus macro means, deterministically ordered by image id."""
    vocab = dataset.vocabulary
    text_rows = embed_vocabulary(bundle.text_encoder, bundle.tokenizer, vocab,
                                 cfg.template, cache_dir=bundle.cache_dir)

    def run_one(sample):
        try:
            return _evaluate_sample(bundle, sample, vocab, cfg, text_rows)
        except Exception as exc:  # per-image failures are recorded, not fatal
            log.warning("image %s failed: %s", sample.image_id, exc)
            return {"id": sample.image_id, "error": str(exc)}

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(run_one, dataset.samples))
    else:
        records = [run_one(s) for s in dataset.samples]
    records.sort(key=lambda r: r["id"])

    reports = [r.pop("_report") for r in records if "_report" in r]
    mean = aggregate_metrics(reports).to_dict() if reports else {}
    return {
        "schema_version": SCHEMA_VERSION,
        "dataset": dataset.name,
        "mode": cfg.mode,
        "config": cfg.hashed_dict(),
        "config_hash": cfg.config_hash(),
        "num_images": len(records),
        "num_failed": sum(1 for r in records if "error" in r),
        "images": records,
        "mean": mean,
    }


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def report_mean_csv(report: dict) -> str:
    lines = ["metric,value"]
    for key in sorted(report.get("mean", {})):
        lines.append(f"{key},{report['mean'][key]}")
    return "\n".join(lines) + "\n"
