"""Pixel-wise latent features from tapped activation maps.

Maps are bilinearly aligned onto a common grid, concatenated channel-wise,
flattened to a pixel matrix, z-scored per channel and decomposed with a thin
SVD. The cluster count is read off the singular-value spectrum: the first
position where the second-order difference turns negative, minus one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .runtime import FeatureMapStack

MODES = ("OVSRI", "OVSRI2")
ENLARGED_HEIGHT = 64
K_MIN, K_MAX = 2, 12
K_FALLBACK = 5


@dataclass
class AlignedFeatureGrid:
    height: int
    width: int
    channels: int
    values: np.ndarray  # (height, width, channels) float32
    mode: str


@dataclass
class PixelFeatureMatrix:
    values: np.ndarray  # (n, d) float64
    grid_shape: tuple[int, int]

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass
class SpectrumAnalysis:
    singular_values: np.ndarray
    second_differences: np.ndarray  # d2[j] is position j+2 in 1-based spectrum order
    slowdown_position: int | None   # 1-based position p, or None
    k: int

    def to_dict(self) -> dict:
        return {
            "sigma": [float(s) for s in self.singular_values],
            "d2": [float(v) for v in self.second_differences],
            "p": self.slowdown_position,
            "k": self.k,
        }


@dataclass
class LatentPixelFeatures:
    projections: np.ndarray  # (n, k) float64
    spectrum: SpectrumAnalysis | None
    grid_shape: tuple[int, int]


def bilinear_resize(values: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Half-pixel-center bilinear resample of an (h, w, c) array."""
    h, w = values.shape[:2]
    if (h, w) == (out_h, out_w):
        return values.copy()
    flat = values.reshape(h, w, -1).astype(np.float64)

    def axis_coords(n_src, n_dst):
        pos = (np.arange(n_dst) + 0.5) * (n_src / n_dst) - 0.5
        pos = np.clip(pos, 0, n_src - 1)
        lo = np.floor(pos).astype(np.intp)
        hi = np.minimum(lo + 1, n_src - 1)
        return lo, hi, pos - lo

    y0, y1, fy = axis_coords(h, out_h)
    x0, x1, fx = axis_coords(w, out_w)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = flat[y0][:, x0] * (1 - fx) + flat[y0][:, x1] * fx
    bot = flat[y1][:, x0] * (1 - fx) + flat[y1][:, x1] * fx
    out = top * (1 - fy) + bot * fy
    return out.reshape(out_h, out_w, *values.shape[2:]).astype(values.dtype)


def target_grid(stack: FeatureMapStack, mode: str) -> tuple[int, int]:
    if mode == "OVSRI":
        # unify on the final-block grid (last tap in sidecar order)
        h, w, _ = stack.maps[-1].shape
        return h, w
    if mode == "OVSRI2":
        img_h, img_w = stack.source_image_size
        return ENLARGED_HEIGHT, math.ceil(ENLARGED_HEIGHT * img_w / img_h)
    raise ValueError(f"unknown mode '{mode}' (expected one of {MODES})")


def resize_feature_maps(stack: FeatureMapStack, mode: str) -> AlignedFeatureGrid:
    """Resample every tapped map onto the mode's grid and concatenate channels."""
    if not stack.maps:
        raise ValueError("empty feature map stack")
    out_h, out_w = target_grid(stack, mode)
    if out_h <= 0 or out_w <= 0:
        raise ValueError(f"degenerate target grid {out_h}x{out_w}")
    resized = [bilinear_resize(m.values, out_h, out_w) for m in stack.maps]
    values = np.concatenate(resized, axis=2).astype(np.float32)
    return AlignedFeatureGrid(height=out_h, width=out_w, channels=values.shape[2],
                              values=values, mode=mode)


def build_pixel_matrix(grid: AlignedFeatureGrid) -> PixelFeatureMatrix:
    """Row-major flatten: pixel (r, c) becomes row r * width + c."""
    values = grid.values.reshape(grid.height * grid.width, grid.channels).astype(np.float64)
    return PixelFeatureMatrix(values=values, grid_shape=(grid.height, grid.width))


def normalize_features(m: PixelFeatureMatrix) -> PixelFeatureMatrix:
    """Z-score each channel (population std); constant channels become zero."""
    if m.n < 2:
        raise ValueError("need at least 2 pixels to normalize")
    mean = m.values.mean(axis=0)
    std = m.values.std(axis=0)
    centered = m.values - mean
    out = np.divide(centered, std, out=np.zeros_like(centered), where=std > 0)
    return PixelFeatureMatrix(values=out, grid_shape=m.grid_shape)


def svd(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD A = U diag(S) V^T with a fixed sign convention.

    The largest-magnitude entry of each V column is made positive (U flipped
    to match) so results are reproducible across linear algebra backends.
    """
    m = np.asarray(m, dtype=np.float64)
    if not np.isfinite(m).all():
        raise ValueError("SVD input contains non-finite values")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    v = vt.T
    anchor = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[anchor, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs, s, v * signs


def adaptive_k(spectrum: np.ndarray, max_inspect: int = 20) -> SpectrumAnalysis:
    """Pick the cluster count from the first slowdown point of the spectrum.

    Second differences d2[i] = s[i-1] - 2 s[i] + s[i+1] (positions 1-based)
    are scanned over the first `max_inspect` singular values; the first
    position p with d2 < 0 gives k = p - 1, clamped to [2, 12]. Without a
    slowdown point k falls back to 5.
    """
    sigma = np.asarray(spectrum, dtype=np.float64)
    if sigma.size < 3:
        raise ValueError("need at least 3 singular values")
    if np.any(np.diff(sigma) > 1e-9 * max(1.0, float(sigma[0]))):
        raise ValueError("singular values must be non-increasing")
    m = min(sigma.size, max_inspect)
    head = sigma[:m]
    d2 = head[:-2] - 2 * head[1:-1] + head[2:]  # d2[j] is 1-based position j+2
    neg = np.flatnonzero(d2 < 0)
    if neg.size:
        p = int(neg[0]) + 2
        k = min(max(p - 1, K_MIN), K_MAX)
    else:
        p = None
        k = K_FALLBACK
    return SpectrumAnalysis(singular_values=sigma, second_differences=d2,
                            slowdown_position=p, k=k)


def project_latent(m: PixelFeatureMatrix, v: np.ndarray, k: int,
                   spectrum: SpectrumAnalysis | None = None) -> LatentPixelFeatures:
    """Project the (normalized) pixel matrix onto the top-k right singular vectors."""
    if not 1 <= k <= v.shape[1]:
        raise ValueError(f"k={k} out of range [1, {v.shape[1]}]")
    proj = m.values @ v[:, :k]
    return LatentPixelFeatures(projections=proj, spectrum=spectrum, grid_shape=m.grid_shape)


def compute_latent(stack: FeatureMapStack, mode: str,
                   k_override: int | None = None) -> LatentPixelFeatures:
    """Full pipeline: resize, flatten, normalize, SVD, adaptive k, project."""
    grid = resize_feature_maps(stack, mode)
    matrix = normalize_features(build_pixel_matrix(grid))
    _, s, v = svd(matrix.values)
    spectrum = adaptive_k(s)
    k = k_override if k_override is not None else spectrum.k
    k = min(k, v.shape[1])
    return project_latent(matrix, v, k, spectrum=spectrum)
