"""FastAPI service wrapping the segmentation/recognition pipeline.

Models load once per process (lazily, behind a lock) and every endpoint is
stateless with respect to requests, so the service can run any number of
workers. Images and tensors travel as server-local paths or base64 payloads.
"""

from __future__ import annotations

import base64
import io
import json
import threading
from dataclasses import replace
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from PIL import Image

from .. import __version__
from ..datasets import load_canonical, load_coco, load_voc, write_canonical
from ..pipeline import (ModelBundle, PipelineConfig, evaluate_dataset, load_bundle,
                        predictions_payload, recognize_image, segment_image,
                        spectrum_payload)
from ..prompts import Vocabulary
from ..runtime import preprocess_image
from ..text_embed import embed_vocabulary
from ..viz import labels_png, latent_maps_png, mask_png, overlay_png
from . import schemas


def _png_b64(img: Image.Image) -> str:
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _tensor_payload(arr: np.ndarray) -> schemas.TensorPayload:
    arr = np.ascontiguousarray(arr)
    return schemas.TensorPayload(
        shape=list(arr.shape),
        dtype=str(arr.dtype),
        data_b64=base64.b64encode(arr.astype(arr.dtype.newbyteorder("<")).tobytes()).decode(),
    )


class ServiceState:
    def __init__(self, model_dir: str | None, defaults: PipelineConfig | None = None):
        self.model_dir = model_dir
        self.defaults = defaults or PipelineConfig()
        self._bundle: ModelBundle | None = None
        self._lock = threading.Lock()

    def bundle(self) -> ModelBundle:
        if self._bundle is None:
            with self._lock:
                if self._bundle is None:
                    if not self.model_dir:
                        raise HTTPException(503, "no model directory configured "
                                                 "(set VOCSEG_MODEL_DIR or --model-dir)")
                    try:
                        self._bundle = load_bundle(self.model_dir)
                    except Exception as exc:
                        raise HTTPException(503, f"failed to load models: {exc}") from exc
        return self._bundle

    def config(self, overrides: schemas.ConfigOverrides) -> PipelineConfig:
        try:
            return replace(self.defaults, **overrides.as_dict())
        except (TypeError, ValueError) as exc:
            raise HTTPException(422, f"invalid config: {exc}") from exc


def _decode_image(path_or_b64: tuple[str | None, str | None], image_id: str | None
                  ) -> tuple[np.ndarray, str]:
    path, b64 = path_or_b64
    if path:
        p = Path(path)
        if not p.exists():
            raise HTTPException(404, f"image not found: {p}")
        with Image.open(p) as im:
            return np.asarray(im.convert("RGB")), image_id or p.stem
    if b64:
        with Image.open(io.BytesIO(base64.b64decode(b64))) as im:
            return np.asarray(im.convert("RGB")), image_id or "inline"
    raise HTTPException(422, "provide image_path or image_b64")


def _load_vocab(vocab: schemas.VocabularyModel | None, vocab_path: str | None) -> Vocabulary:
    if vocab is not None:
        return Vocabulary.from_dict(vocab.model_dump())
    if vocab_path:
        p = Path(vocab_path)
        if not p.exists():
            raise HTTPException(404, f"vocabulary file not found: {p}")
        return Vocabulary.from_dict(json.loads(p.read_text()))
    raise HTTPException(422, "provide vocab or vocab_path")


def _load_dataset(spec: schemas.DatasetSpec):
    try:
        if spec.kind == "coco":
            return load_coco(spec.annotation_json, spec.image_dir, limit=spec.limit)
        if spec.kind == "voc":
            return load_voc(spec.image_dir, spec.seg_dir, limit=spec.limit)
        if spec.kind == "canonical":
            ds = load_canonical(spec.root)
            if spec.limit is not None:
                ds.samples = ds.samples[: spec.limit]
            return ds
    except HTTPException:
        raise
    except FileNotFoundError as exc:
        raise HTTPException(404, str(exc)) from exc
    except Exception as exc:
        raise HTTPException(422, f"failed to load dataset: {exc}") from exc
    raise HTTPException(422, f"unknown dataset kind '{spec.kind}'")


def create_app(model_dir: str | None = None,
               defaults: PipelineConfig | None = None) -> FastAPI:
    app = FastAPI(title="vocseg", version=__version__)
    state = ServiceState(model_dir, defaults)
    app.state.service = state

    @app.get("/v1/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__,
                                      model_dir=state.model_dir,
                                      models_loaded=state._bundle is not None)

    @app.get("/v1/config")
    def config():
        return state.defaults.hashed_dict() | {"config_hash": state.defaults.config_hash()}

    @app.post("/v1/segment", response_model=schemas.SegmentResponse)
    def segment(req: schemas.SegmentRequest):
        cfg = state.config(req.config)
        image, image_id = _decode_image((req.image_path, req.image_b64), req.image_id)
        out = segment_image(state.bundle(), image, cfg)
        resp = schemas.SegmentResponse(
            image_id=image_id,
            grid=list(out.latent.grid_shape),
            k=out.seg.k,
            spectrum=spectrum_payload(out, cfg, image_id),
            labels_png_b64=_png_b64(labels_png(out.seg.labels_full)),
        )
        if req.include_masks:
            resp.masks_png_b64 = [_png_b64(mask_png(m)) for m in out.seg.masks]
        if req.include_latent_maps:
            resp.latent_maps_png_b64 = [_png_b64(im) for im in latent_maps_png(out.latent)]
        return resp

    @app.post("/v1/recognize", response_model=schemas.RecognizeResponse)
    def recognize(req: schemas.RecognizeRequest):
        cfg = state.config(req.config)
        image, image_id = _decode_image((req.image_path, req.image_b64), req.image_id)
        vocab = _load_vocab(req.vocab, req.vocab_path)
        out = recognize_image(state.bundle(), image, vocab, cfg)
        resp = schemas.RecognizeResponse(
            image_id=image_id,
            predictions=predictions_payload(out.predictions, cfg, image_id),
        )
        if req.include_overlay:
            resp.overlay_png_b64 = _png_b64(overlay_png(image, out.predictions))
        if req.include_crops:
            resp.crops_png_b64 = [_png_b64(Image.fromarray(obj.crop))
                                  for obj in out.objects]
        return resp

    @app.post("/v1/evaluate")
    def evaluate(req: schemas.EvaluateRequest):
        cfg = state.config(req.config)
        dataset = _load_dataset(req.dataset)
        if not dataset.samples:
            raise HTTPException(422, "dataset has no samples")
        return evaluate_dataset(state.bundle(), dataset, cfg)

    @app.post("/v1/embed-text", response_model=schemas.EmbedTextResponse)
    def embed_text(req: schemas.EmbedTextRequest):
        cfg = state.config(req.config)
        vocab = _load_vocab(req.vocab, req.vocab_path)
        bundle = state.bundle()
        template = req.template or cfg.template
        rows = embed_vocabulary(bundle.text_encoder, bundle.tokenizer, vocab,
                                template, cache_dir=bundle.cache_dir)
        cache_path = bundle.cache_dir / f"{vocab.digest()}.{template}.emb"
        return schemas.EmbedTextResponse(
            shape=list(rows.shape),
            data_b64=base64.b64encode(rows.astype("<f4").tobytes()).decode(),
            categories=vocab.names,
            cache_path=str(cache_path) if cache_path.exists() else None,
        )

    @app.post("/v1/datasets/convert", response_model=schemas.ConvertResponse)
    def convert(req: schemas.ConvertRequest):
        dataset = _load_dataset(req.dataset)
        manifest = write_canonical(dataset, req.dst_root)
        return schemas.ConvertResponse(manifest=str(manifest),
                                       num_samples=len(dataset.samples))

    @app.post("/v1/models/run", response_model=schemas.RunModelResponse)
    def run_model(req: schemas.RunModelRequest):
        bundle = state.bundle()
        handles = {"backbone": bundle.backbone, "image_encoder": bundle.image_encoder,
                   "text_encoder": bundle.text_encoder}
        if req.model not in handles:
            raise HTTPException(422, f"unknown model '{req.model}'")
        handle = handles[req.model]
        if req.input_b64 is not None:
            if not req.input_shape:
                raise HTTPException(422, "input_shape required with input_b64")
            raw = base64.b64decode(req.input_b64)
            feed = np.frombuffer(raw, dtype=np.dtype(req.input_dtype).newbyteorder("<"))
            feed = feed.reshape(req.input_shape).astype(req.input_dtype)
        else:
            image, _ = _decode_image((req.image_path, req.image_b64), None)
            tensor = preprocess_image(image, handle.input_spec) if req.preprocess else None
            if tensor is None:
                raise HTTPException(422, "raw image input requires preprocess=true")
            feed = tensor.values.transpose(2, 0, 1)[None].astype(np.float32)
        taps = req.taps or handle.tap_names
        try:
            outs = handle.runner.run({handle.input_name: feed}, taps)
        except Exception as exc:
            raise HTTPException(422, f"model run failed: {exc}") from exc
        return schemas.RunModelResponse(
            outputs={name: _tensor_payload(arr) for name, arr in outs.items()})

    return app
