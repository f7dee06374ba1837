"""Model loading and inference over exported ONNX graphs.

Each graph ships with a `<name>.meta.json` sidecar describing preprocessing
(target size, per-channel mean/std, resize policy), the activation taps to
expose, and encoder metadata (logit scale, text context length). Handles are
immutable after load and safe to share across workers.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.special import expit

from .engine import GraphRunner, load_model as parse_graph

RESIZE_POLICIES = ("none", "stretch", "shorter_center_crop")


class SidecarError(ValueError):
    """Sidecar config missing or malformed."""


@dataclass
class PreprocessSpec:
    height: int | None
    width: int | None
    channels: int
    mean: list[float]
    std: list[float]
    resize_policy: str = "none"


@dataclass
class ImageTensor:
    height: int
    width: int
    channels: int
    values: np.ndarray  # HWC float32, normalized


@dataclass
class FeatureMap:
    name: str
    values: np.ndarray  # HWC float32

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape


@dataclass
class FeatureMapStack:
    maps: list[FeatureMap]
    source_image_size: tuple[int, int]  # (H, W)


@dataclass
class ModelHandle:
    path: Path
    graph_id: str
    input_spec: PreprocessSpec
    tap_names: list[str]
    sidecar: dict
    input_name: str
    runner: GraphRunner = field(repr=False)

    @property
    def logit_scale(self) -> float | None:
        return self.sidecar.get("logit_scale")

    @property
    def context_length(self) -> int | None:
        return self.sidecar.get("context_length")


def _read_sidecar(model_path: Path) -> dict:
    sidecar_path = model_path.with_suffix(".meta.json")
    if not sidecar_path.exists():
        raise SidecarError(f"sidecar config not found: {sidecar_path}")
    try:
        sidecar = json.loads(sidecar_path.read_text())
    except json.JSONDecodeError as exc:
        raise SidecarError(f"sidecar {sidecar_path} is not valid JSON: {exc}") from exc
    if "input" not in sidecar or "taps" not in sidecar:
        raise SidecarError(f"sidecar {sidecar_path} must define 'input' and 'taps'")
    return sidecar


def _input_spec(sidecar: dict) -> PreprocessSpec:
    cfg = sidecar["input"]
    policy = cfg.get("resize_policy", "none")
    if policy not in RESIZE_POLICIES:
        raise SidecarError(f"unknown resize_policy '{policy}' (expected one of {RESIZE_POLICIES})")
    spec = PreprocessSpec(
        height=cfg.get("h"),
        width=cfg.get("w"),
        channels=cfg.get("channels", 3),
        mean=list(cfg.get("mean", [])),
        std=list(cfg.get("std", [])),
        resize_policy=policy,
    )
    for dim in (spec.height, spec.width):
        if dim is not None and dim <= 0:
            raise SidecarError(f"non-positive input dimension {dim}")
    if spec.channels not in (1, 3):
        raise SidecarError(f"channels must be 1 or 3, got {spec.channels}")
    return spec


def load_model(path: str | Path, tap_names: list[str] | None = None) -> ModelHandle:
    """Load an exported graph plus its sidecar and resolve activation taps.

    Passing an empty tap list selects the graph's declared outputs (the usual
    case for the embedding encoders).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"model file not found: {path}")
    data = path.read_bytes()
    graph = parse_graph(data)
    sidecar = _read_sidecar(path)
    if tap_names is None:
        tap_names = list(sidecar.get("taps", []))
    if not tap_names:
        tap_names = [o.name for o in graph.outputs]
    runner = GraphRunner(graph)
    unresolved = [t for t in tap_names if t not in runner.value_names]
    if unresolved:
        raise ValueError(
            f"tap name(s) {unresolved} not found in {path.name}; "
            f"available outputs: {sorted(runner.value_names - set(graph.initializers))}")
    feed_names = runner.input_names
    if len(feed_names) != 1:
        raise ValueError(f"{path.name}: expected exactly one graph input, got {feed_names}")
    return ModelHandle(
        path=path,
        graph_id=hashlib.sha256(data).hexdigest(),
        input_spec=_input_spec(sidecar),
        tap_names=list(tap_names),
        sidecar=sidecar,
        input_name=feed_names[0],
        runner=runner,
    )


def _resize(img: Image.Image, spec: PreprocessSpec) -> Image.Image:
    if spec.resize_policy == "none" or spec.height is None or spec.width is None:
        return img
    if spec.resize_policy == "stretch":
        return img.resize((spec.width, spec.height), Image.BICUBIC)
    # shorter_center_crop: scale shorter side to target, then center crop
    w, h = img.size
    scale = max(spec.width / w, spec.height / h)
    nw, nh = max(1, round(w * scale)), max(1, round(h * scale))
    img = img.resize((nw, nh), Image.BICUBIC)
    left = (nw - spec.width) // 2
    top = (nh - spec.height) // 2
    return img.crop((left, top, left + spec.width, top + spec.height))


def preprocess_image(raw: np.ndarray | Image.Image, spec: PreprocessSpec) -> ImageTensor:
    """Resize per the sidecar policy and normalize channels to (v - mean) / std."""
    if isinstance(raw, np.ndarray):
        if raw.size == 0:
            raise ValueError("cannot preprocess a zero-sized image")
        if raw.ndim == 2:
            raw = raw[:, :, None]
        if raw.shape[2] != spec.channels:
            raise ValueError(f"image has {raw.shape[2]} channels, spec expects {spec.channels}")
        img = Image.fromarray(raw.squeeze(2) if spec.channels == 1 else raw)
    else:
        img = raw
        if img.size[0] == 0 or img.size[1] == 0:
            raise ValueError("cannot preprocess a zero-sized image")
        bands = len(img.getbands())
        if bands != spec.channels:
            raise ValueError(f"image has {bands} channels, spec expects {spec.channels}")
    img = _resize(img, spec)
    arr = np.asarray(img, dtype=np.float32) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if spec.mean:
        arr = (arr - np.asarray(spec.mean, dtype=np.float32)) / np.asarray(spec.std, dtype=np.float32)
    arr = arr.astype(np.float32)
    if not np.isfinite(arr).all():
        raise ValueError("preprocessed image contains non-finite values")
    h, w, c = arr.shape
    return ImageTensor(height=h, width=w, channels=c, values=arr)


def run_feature_taps(handle: ModelHandle, inp: ImageTensor) -> FeatureMapStack:
    """Run the backbone and collect the tapped activation maps."""
    if inp.channels != handle.input_spec.channels:
        raise ValueError(f"input has {inp.channels} channels, model expects "
                         f"{handle.input_spec.channels}")
    nchw = inp.values.transpose(2, 0, 1)[None].astype(np.float32)
    outs = handle.runner.run({handle.input_name: nchw}, handle.tap_names)
    maps = []
    for name in handle.tap_names:
        chw = outs[name][0]
        maps.append(FeatureMap(name=name, values=np.ascontiguousarray(chw.transpose(1, 2, 0))))
    return FeatureMapStack(maps=maps, source_image_size=(inp.height, inp.width))


def run_embedding(handle: ModelHandle, inp: ImageTensor | np.ndarray) -> np.ndarray:
    """Run an encoder graph to its (un-normalized) embedding vector."""
    if isinstance(inp, ImageTensor):
        feed = inp.values.transpose(2, 0, 1)[None].astype(np.float32)
    else:
        feed = np.asarray(inp)
        if feed.dtype.kind in "iu":
            feed = feed.astype(np.int64).reshape(1, -1)
        else:
            feed = feed.astype(np.float32)
            if feed.ndim == 3:
                feed = feed.transpose(2, 0, 1)[None]
    out_name = handle.tap_names[0]
    vec = handle.runner.run({handle.input_name: feed}, [out_name])[out_name]
    return np.asarray(vec, dtype=np.float32).reshape(-1)


def swish(a: np.ndarray) -> np.ndarray:
    """Elementwise a * sigmoid(a); reference for the activation the graphs bake in."""
    a = np.asarray(a)
    return a * expit(a)
