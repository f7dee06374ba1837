"""Pydantic request/response models for the HTTP API."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class ConfigOverrides(BaseModel):
    """Partial pipeline config; unset fields keep server defaults."""
    mode: Optional[str] = None
    template: Optional[str] = None
    use_svd: Optional[bool] = None
    svd_fit: Optional[str] = None
    theta: Optional[float] = None
    k_latent: Optional[int] = None
    k_clusters: Optional[int] = None
    linkage: Optional[str] = None
    opening_se: Optional[int] = None
    dilation_se: Optional[int] = None
    min_area_fraction: Optional[float] = None
    min_area_px: Optional[int] = None
    merge_per_class: Optional[bool] = None
    logit_scale: Optional[float] = None
    workers: Optional[int] = None
    verbose: Optional[bool] = None

    def as_dict(self) -> dict:
        return {k: v for k, v in self.model_dump().items() if v is not None}


class VocabularyModel(BaseModel):
    categories: list[dict]
    includes_open_set: bool = True


class SegmentRequest(BaseModel):
    image_path: Optional[str] = None
    image_b64: Optional[str] = None
    image_id: Optional[str] = None
    config: ConfigOverrides = Field(default_factory=ConfigOverrides)
    include_masks: bool = False
    include_latent_maps: bool = False


class SegmentResponse(BaseModel):
    image_id: str
    grid: list[int]
    k: int
    spectrum: dict
    labels_png_b64: str
    masks_png_b64: list[str] = []
    latent_maps_png_b64: list[str] = []


class RecognizeRequest(BaseModel):
    image_path: Optional[str] = None
    image_b64: Optional[str] = None
    image_id: Optional[str] = None
    vocab: Optional[VocabularyModel] = None
    vocab_path: Optional[str] = None
    config: ConfigOverrides = Field(default_factory=ConfigOverrides)
    include_overlay: bool = False
    include_crops: bool = False


class RecognizeResponse(BaseModel):
    image_id: str
    predictions: dict
    overlay_png_b64: Optional[str] = None
    crops_png_b64: list[str] = []


class DatasetSpec(BaseModel):
    kind: str  # coco | voc | canonical
    annotation_json: Optional[str] = None
    image_dir: Optional[str] = None
    seg_dir: Optional[str] = None
    root: Optional[str] = None
    limit: Optional[int] = None


class EvaluateRequest(BaseModel):
    dataset: DatasetSpec
    config: ConfigOverrides = Field(default_factory=ConfigOverrides)


class EmbedTextRequest(BaseModel):
    vocab: Optional[VocabularyModel] = None
    vocab_path: Optional[str] = None
    template: Optional[str] = None
    config: ConfigOverrides = Field(default_factory=ConfigOverrides)


class EmbedTextResponse(BaseModel):
    shape: list[int]
    dtype: str = "float32"
    data_b64: str  # raw little-endian row-major bytes
    categories: list[str]
    cache_path: Optional[str] = None


class ConvertRequest(BaseModel):
    dataset: DatasetSpec
    dst_root: str


class ConvertResponse(BaseModel):
    manifest: str
    num_samples: int


class RunModelRequest(BaseModel):
    model: str  # backbone | image_encoder | text_encoder
    image_path: Optional[str] = None
    image_b64: Optional[str] = None
    input_b64: Optional[str] = None     # raw little-endian payload
    input_shape: Optional[list[int]] = None
    input_dtype: str = "float32"
    preprocess: bool = True
    taps: Optional[list[str]] = None


class TensorPayload(BaseModel):
    shape: list[int]
    dtype: str
    data_b64: str


class RunModelResponse(BaseModel):
    outputs: dict[str, TensorPayload]


class HealthResponse(BaseModel):
    status: str
    version: str
    model_dir: Optional[str] = None
    models_loaded: bool = False


class ErrorResponse(BaseModel):
    detail: Any
