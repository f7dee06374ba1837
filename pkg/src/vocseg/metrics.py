"""Segmentation and recognition metrics.

HIoU: predicted and ground-truth masks are matched one-to-one by maximizing
total IoU; the score is the mean IoU over matched pairs only. Object-level
classification metrics compare predicted label sets against per-image
ground-truth label sets; AP is defined as precision times recall.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .prompts import OPEN_SET_NAME
from .recognize import Prediction, REJECTED

_TIE_TOL = 1e-9


@dataclass
class MaskSet:
    masks: list[np.ndarray]
    labels: list[str] | None = None
    ignore: np.ndarray | None = None  # pixels excluded from both |∩| and |∪|


@dataclass
class Assignment:
    pairs: list[tuple[int, int]]
    total_iou: float


@dataclass
class MetricsReport:
    hiou: float = 0.0
    accuracy: float = 0.0
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    ap: float = 0.0
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def to_dict(self) -> dict:
        return {k: (round(v, 6) if isinstance(v, float) else v)
                for k, v in self.__dict__.items()}


def iou(a: np.ndarray, b: np.ndarray, ignore: np.ndarray | None = None) -> float:
    """|a ∧ b| / |a ∨ b|, zero when the union is empty."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    if ignore is not None:
        valid = ~np.asarray(ignore, dtype=bool)
        a = a & valid
        b = b & valid
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return np.count_nonzero(a & b) / union


def _optimal_total(weights: np.ndarray) -> float:
    if weights.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(weights, maximize=True)
    return float(weights[rows, cols].sum())


def hungarian_match(weights: np.ndarray) -> Assignment:
    """Maximum-total one-to-one assignment over an IoU matrix.

    Always matches min(|P|, |G|) pairs. Among equally good assignments the
    lexicographically smallest pair list wins, fixed greedily one predicted
    index at a time.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.size == 0:
        return Assignment(pairs=[], total_iou=0.0)
    if weights.ndim != 2:
        raise ValueError("weight matrix must be 2-d")
    if not np.isfinite(weights).all() or (weights < 0).any():
        raise ValueError("weights must be finite and non-negative")
    n_pred, n_gt = weights.shape
    total = _optimal_total(weights)
    tol = _TIE_TOL * max(1.0, abs(total))

    # fix pairs greedily in (pred, gt) order; a pair is kept iff the optimum
    # is still reachable, which yields the lexicographically smallest optimum
    pairs: list[tuple[int, int]] = []
    free_pred = list(range(n_pred))
    free_gt = list(range(n_gt))
    fixed = 0.0
    for p in range(n_pred):
        if not free_gt:
            break
        free_pred.remove(p)
        for g in free_gt:
            rest_gt = [c for c in free_gt if c != g]
            rest = weights[np.ix_(free_pred, rest_gt)]
            if fixed + weights[p, g] + _optimal_total(rest) >= total - tol:
                pairs.append((p, g))
                fixed += weights[p, g]
                free_gt.remove(g)
                break
    return Assignment(pairs=pairs, total_iou=float(sum(weights[p, g] for p, g in pairs)))


def hungarian_miou(pred: MaskSet, gt: MaskSet) -> float:
    """Mean IoU over the optimal pred/gt pairing; 0 when either side is empty."""
    if not pred.masks or not gt.masks:
        return 0.0
    ignore = gt.ignore
    weights = np.zeros((len(pred.masks), len(gt.masks)))
    for i, pm in enumerate(pred.masks):
        for j, gm in enumerate(gt.masks):
            weights[i, j] = iou(pm, gm, ignore=ignore)
    assignment = hungarian_match(weights)
    if not assignment.pairs:
        return 0.0
    return assignment.total_iou / len(assignment.pairs)


def ap_score(precision: float, recall: float) -> float:
    """Semantic-matching AP: the product of precision and recall."""
    return precision * recall


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def classification_metrics(preds: list[Prediction], gt_labels: set[str]) -> MetricsReport:
    """Per-image label metrics; rejected and open-set predictions are not positives."""
    kept = [p for p in preds if p.label != REJECTED]
    positive = {p.label for p in kept if p.label != OPEN_SET_NAME}
    gt = set(gt_labels)
    tp = len(positive & gt)
    fp = len(positive - gt)
    fn = len(gt - positive)
    precision = tp / len(positive) if positive else 0.0
    recall = tp / len(gt) if gt else 0.0
    accuracy = (sum(1 for p in kept if p.label in gt) / len(kept)) if kept else 0.0
    return MetricsReport(accuracy=accuracy, precision=precision, recall=recall,
                         f1=f1_score(precision, recall), ap=ap_score(precision, recall),
                         tp=tp, fp=fp, fn=fn)


def aggregate_metrics(reports: list[MetricsReport]) -> MetricsReport:
    """Macro mean over per-image reports (counts are summed)."""
    if not reports:
        raise ValueError("no per-image reports to aggregate")
    mean = lambda xs: float(np.mean(xs))  # noqa: E731
    return MetricsReport(
        hiou=mean([r.hiou for r in reports]),
        accuracy=mean([r.accuracy for r in reports]),
        precision=mean([r.precision for r in reports]),
        recall=mean([r.recall for r in reports]),
        f1=mean([r.f1 for r in reports]),
        ap=mean([r.ap for r in reports]),
        tp=int(sum(r.tp for r in reports)),
        fp=int(sum(r.fp for r in reports)),
        fn=int(sum(r.fn for r in reports)),
    )
