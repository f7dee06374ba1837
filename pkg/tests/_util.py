"""Shared test helpers: seeded tensors matching the export tool's RNG, and
small brute-force oracles kept independent of the library code paths."""

import numpy as np


def mulberry32(seed):
    state = seed & 0xFFFFFFFF

    def rand():
        nonlocal state
        state = (state + 0x6D2B79F5) & 0xFFFFFFFF
        t = state
        t = ((t ^ (t >> 15)) * (t | 1)) & 0xFFFFFFFF
        t = (t ^ ((t + ((t ^ (t >> 7)) * (t | 61))) & 0xFFFFFFFF)) & 0xFFFFFFFF
        return ((t ^ (t >> 14)) & 0xFFFFFFFF) / 4294967296.0

    return rand


def mb32_tensor(seed, shape):
    rand = mulberry32(seed)
    n = int(np.prod(shape))
    vals = np.asarray([rand() for _ in range(n)], dtype=np.float64)
    return (2.0 * vals - 1.0).astype(np.float32).reshape(shape)


def point_in_polygon(px, py, pts):
    """Even-odd crossing test for one point (brute-force oracle)."""
    inside = False
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        if (y1 <= py) != (y2 <= py):
            t = (py - y1) / (y2 - y1)
            if px < x1 + t * (x2 - x1):
                inside = not inside
    return inside


def rasterize_oracle(coords, height, width):
    pts = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    mask = np.zeros((height, width), dtype=bool)
    for r in range(height):
        for c in range(width):
            mask[r, c] = point_in_polygon(c + 0.5, r + 0.5, pts)
    return mask


def enumerate_assignments(weights):
    """Every maximal one-to-one assignment of a rectangular matrix, once each:
    a sorted choice of matched predictions crossed with orderings of targets."""
    from itertools import combinations, permutations

    n_pred, n_gt = weights.shape
    size = min(n_pred, n_gt)
    results = []
    for preds in combinations(range(n_pred), size):
        for gts in permutations(range(n_gt), size):
            pairs = list(zip(preds, gts))
            total = sum(weights[p, g] for p, g in pairs)
            results.append((total, pairs))
    return results


def best_assignment_oracle(weights, tol=1e-9):
    """Exhaustive optimum with lexicographically smallest pair list on ties."""
    results = enumerate_assignments(np.asarray(weights, dtype=np.float64))
    best = max(t for t, _ in results)
    candidates = [pairs for t, pairs in results if t >= best - tol]
    return best, min(candidates)


def ward_increase(points, a_members, b_members):
    """ESS increase when merging two clusters, from raw points."""
    pa = points[list(a_members)]
    pb = points[list(b_members)]
    ca, cb = pa.mean(axis=0), pb.mean(axis=0)
    na, nb = len(pa), len(pb)
    return na * nb / (na + nb) * float(((ca - cb) ** 2).sum())


def cluster_distance_oracle(points, a_members, b_members, linkage):
    import itertools

    if linkage == "ward":
        return ward_increase(points, a_members, b_members)
    dists = [np.linalg.norm(points[i] - points[j])
             for i, j in itertools.product(a_members, b_members)]
    return max(dists) if linkage == "complete" else float(np.mean(dists))


def agglomerate_oracle(points, linkage, num_merges=None):
    """Step-by-step greedy agglomeration computed from raw points each step.

    Tie-break mirrors the library contract: the pair whose clusters hold the
    lowest original indices wins (compare the smallest member of each side).
    Returns merges as (id_a, id_b, height) with new clusters numbered n+step.
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    clusters = {i: (frozenset([i]), i) for i in range(n)}  # id -> (members, min member)
    merges = []
    steps = n - 1 if num_merges is None else num_merges
    for step in range(steps):
        best = None
        for ia in clusters:
            for ib in clusters:
                if ia >= ib:
                    continue
                d = cluster_distance_oracle(points, clusters[ia][0], clusters[ib][0], linkage)
                ka = min(clusters[ia][1], clusters[ib][1])
                kb = max(clusters[ia][1], clusters[ib][1])
                key = (d, ka, kb)
                if best is None or key < best[0]:
                    best = (key, ia, ib)
        (d, _, _), ia, ib = best
        members = clusters[ia][0] | clusters[ib][0]
        new_id = n + step
        merges.append((min(ia, ib), max(ia, ib), d))
        slot = min(clusters[ia][1], clusters[ib][1])
        del clusters[ia], clusters[ib]
        clusters[new_id] = (members, slot)
    return merges
