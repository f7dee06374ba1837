"""Agglomerative clustering of pixel latent features and mask generation.

Greedy bottom-up merging over a full distance matrix with Lance-Williams
updates. Comparisons are on Ward's variance-increase criterion by default
(average / complete also available). Determinism contract: on equal merge
costs the pair whose clusters hold the lowest original point indices wins,
compared lexicographically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import squareform, pdist

LINKAGES = ("ward", "average", "complete")

# full float64 matrices get large past this many points; drop to float32
_F32_THRESHOLD = 2048


@dataclass
class Merge:
    a: int      # cluster id (originals 0..n-1, merged clusters n, n+1, ...)
    b: int
    height: float
    size: int


@dataclass
class SegmentationResult:
    labels_grid: np.ndarray   # (h, w) int
    labels_full: np.ndarray   # (H, W) int
    masks: np.ndarray         # (k, H, W) bool
    k: int
    mode: str


def _initial_matrix(points: np.ndarray, linkage: str, dtype) -> np.ndarray:
    d2 = squareform(pdist(points, "sqeuclidean")).astype(dtype)
    if linkage == "ward":
        # variance increase for singleton merges is half the squared distance
        return d2 / 2
    return np.sqrt(d2, dtype=dtype)


def linkage_merges(points: np.ndarray, linkage: str = "ward",
                   num_merges: int | None = None) -> list[Merge]:
    """Merge sequence for agglomerative clustering (full tree by default)."""
    if linkage not in LINKAGES:
        raise ValueError(f"unknown linkage '{linkage}' (expected one of {LINKAGES})")
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-d array")
    n = points.shape[0]
    if num_merges is None:
        num_merges = n - 1
    if num_merges <= 0:
        return []

    dtype = np.float32 if n > _F32_THRESHOLD else np.float64
    dist = _initial_matrix(points, linkage, dtype)
    inf = np.asarray(np.inf, dtype=dtype)
    np.fill_diagonal(dist, inf)

    active = np.ones(n, dtype=bool)
    sizes = np.ones(n, dtype=np.int64)
    ids = np.arange(n)
    nn_dist = dist.min(axis=1)
    nn_idx = dist.argmin(axis=1)

    # inactive slots keep stale matrix entries; every read masks them out,
    # which avoids strided column writes on the big matrix
    def rescan(row: int) -> None:
        vals = np.where(active, dist[row], inf)
        vals[row] = inf
        j = int(vals.argmin())  # argmin takes the lowest slot on ties
        nn_dist[row] = vals[j]
        nn_idx[row] = j

    merges: list[Merge] = []
    for step in range(num_merges):
        masked = np.where(active, nn_dist, inf)
        a = int(masked.argmin())
        b = int(nn_idx[a])
        height = float(nn_dist[a])
        # with a symmetric matrix the lowest tied row also has the lowest
        # tied partner slot, so (a, b) is the lexicographically least pair
        if b < a:
            a, b = b, a

        na, nb = sizes[a], sizes[b]
        dab = dist[a, b]
        da, db = dist[a].copy(), dist[b]
        if linkage == "ward":
            nx = sizes
            tot = na + nb + nx
            new = ((na + nx) * da + (nb + nx) * db - nx * dab) / tot
        elif linkage == "average":
            new = (na * da + nb * db) / (na + nb)
        else:  # complete
            new = np.maximum(da, db)

        active[b] = False
        live = np.flatnonzero(active)
        dist[a, :] = new
        dist[live, a] = new[live]
        dist[a, a] = inf
        sizes[a] = na + nb
        merges.append(Merge(a=int(min(ids[a], ids[b])), b=int(max(ids[a], ids[b])),
                            height=height, size=int(sizes[a])))
        ids[a] = n + step
        if len(live) <= 1 or step == num_merges - 1:
            break

        # rows pointing at a merged slot are stale; others may gain a better
        # (or equally good but lower-slot) neighbor at slot a
        stale = active & ((nn_idx == a) | (nn_idx == b))
        stale[a] = True
        for row in np.flatnonzero(stale):
            rescan(int(row))
        fresh = active & ~stale
        fresh[a] = False
        better = fresh & ((new < nn_dist) | ((new == nn_dist) & (a < nn_idx)))
        nn_dist[better] = new[better]
        nn_idx[better] = a
    return merges


def _labels_from_merges(n: int, merges: list[Merge]) -> np.ndarray:
    parent = np.arange(n + len(merges))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t, m in enumerate(merges):
        new_id = n + t
        parent[find(m.a)] = new_id
        parent[find(m.b)] = new_id
    roots = np.asarray([find(i) for i in range(n)])
    return roots


def cluster(points: np.ndarray, k: int, linkage: str = "ward") -> np.ndarray:
    """Cluster rows of `points` into exactly k groups.

    Labels are renumbered by descending cluster size (ties broken by the
    smallest member index) so identical inputs always yield identical ids.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > n:
        raise ValueError(f"cannot form {k} clusters from {n} points")
    merges = linkage_merges(points, linkage, num_merges=n - k)
    roots = _labels_from_merges(n, merges)
    seen = {}
    for i, r in enumerate(roots):
        if r not in seen:
            seen[r] = {"first": i, "count": 0}
        seen[r]["count"] += 1
    order = sorted(seen, key=lambda r: (-seen[r]["count"], seen[r]["first"]))
    remap = {r: idx for idx, r in enumerate(order)}
    return np.asarray([remap[r] for r in roots], dtype=np.int64)


def labels_to_masks(labels: np.ndarray, grid_shape: tuple[int, int],
                    image_size: tuple[int, int], k: int | None = None,
                    mode: str = "OVSRI2") -> SegmentationResult:
    """Reshape per-pixel labels to the grid and upscale to image resolution.

    Upscaling is nearest-neighbor so labels stay categorical; one binary mask
    per cluster is materialized at image resolution.
    """
    h, w = grid_shape
    labels = np.asarray(labels).ravel()
    if labels.size != h * w:
        raise ValueError(f"got {labels.size} labels for a {h}x{w} grid")
    grid = labels.reshape(h, w).astype(np.int64)
    height, width = image_size
    if (height, width) == (h, w):
        full = grid.copy()
    else:
        rows = np.minimum((np.arange(height) + 0.5) * h / height, h - 1).astype(np.intp)
        cols = np.minimum((np.arange(width) + 0.5) * w / width, w - 1).astype(np.intp)
        full = grid[rows][:, cols]
    if k is None:
        k = int(grid.max()) + 1
    masks = np.stack([full == c for c in range(k)])
    return SegmentationResult(labels_grid=grid, labels_full=full, masks=masks, k=k, mode=mode)
