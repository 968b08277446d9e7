"""Segmentation quality measures: binary F-score, Hungarian-matched
instance mIoU, a variance-ratio diagnostic of metric robustness, plus
resolution alignment and dataset filtering rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .errors import (
    ConfigError,
    DegenerateStatistic,
    DimensionError,
    InsufficientForeground,
    InsufficientInstances,
    InvalidValue,
    NoInstances,
)
from .rng import Lcg64
from .similarity import MahalanobisContext, MetricKind, covariance_context, metric_sim
from .tensor_io import FeatureMap, LabelMask


@dataclass(frozen=True)
class EvalReport:
    f_score: float
    per_instance_iou: list[tuple[int, int | None, float]]
    mean_iou: float
    mr: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "f_score": self.f_score,
            "miou": self.mean_iou,
            "pairs": [[g, p, i] for g, p, i in self.per_instance_iou],
            "mr": self.mr,
        }


@dataclass(frozen=True)
class FilterCriteria:
    min_object_frac: float = 0.07
    min_size_ratio: float = 0.3
    max_mbor: float = 0.5

    def __post_init__(self):
        for name in ("min_object_frac", "min_size_ratio", "max_mbor"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must be in (0, 1), got {v}")


def f_score(pred: LabelMask, gt: LabelMask) -> float:
    """F1 over foreground pixels; two empty masks agree perfectly."""
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise DimensionError("prediction and ground truth dimensions differ")
    p = pred.labels > 0
    g = gt.labels > 0
    if not p.any() and not g.any():
        return 1.0
    if not p.any() or not g.any():
        return 0.0
    tp = float(np.logical_and(p, g).sum())
    if tp == 0.0:
        return 0.0
    precision = tp / float(p.sum())
    recall = tp / float(g.sum())
    return 2.0 * precision * recall / (precision + recall)


def _lsa_total(cost: np.ndarray, maximize: bool) -> float:
    rows, cols = scipy.optimize.linear_sum_assignment(cost, maximize=maximize)
    return math.fsum(float(cost[r, c]) for r, c in zip(rows, cols))


def _totals_equal(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-12 * max(1.0, abs(a), abs(b))


def hungarian(cost: np.ndarray, maximize: bool = False) -> list[tuple[int, int]]:
    """Optimal assignment of min(k, m) pairs, ties resolved to the
    lexicographically smallest (row, col) sequence.

    The assignment core finds the optimal total; each pair is then fixed
    greedily, keeping a candidate only if an optimal completion exists.
    """
    mat = np.asarray(cost, dtype=np.float64)
    if mat.ndim != 2 or mat.size == 0:
        raise DimensionError(f"cost must be a nonempty 2-D matrix, got shape {mat.shape}")
    if not np.isfinite(mat).all():
        raise InvalidValue("cost matrix contains non-finite entries")
    k, m = mat.shape
    n_match = min(k, m)
    best_total = _lsa_total(mat, maximize)

    matched: list[tuple[int, int]] = []
    fixed_costs: list[float] = []
    rows_left = list(range(k))
    cols_left = list(range(m))
    while len(matched) < n_match:
        r = rows_left[0]
        chosen = None
        for c in cols_left:
            sub_rows = [x for x in rows_left if x != r]
            sub_cols = [x for x in cols_left if x != c]
            completion = 0.0
            if sub_rows and sub_cols and len(matched) + 1 < n_match:
                completion = _lsa_total(mat[np.ix_(sub_rows, sub_cols)], maximize)
            total = math.fsum(fixed_costs + [float(mat[r, c]), completion])
            if _totals_equal(total, best_total):
                chosen = c
                break
        if chosen is None:
            # No optimal matching uses this row (possible when k > m):
            # leave it unmatched and move on.
            sub_rows = [x for x in rows_left if x != r]
            total = math.fsum(fixed_costs + [_lsa_total(mat[np.ix_(sub_rows, cols_left)], maximize)])
            if not (k > m and sub_rows and _totals_equal(total, best_total)):
                raise InvalidValue("assignment search failed to reproduce the optimal total")
            rows_left.remove(r)
            continue
        matched.append((r, chosen))
        fixed_costs.append(float(mat[r, chosen]))
        rows_left.remove(r)
        cols_left.remove(chosen)
    return matched


def align_resolution(pred: LabelMask, gt: LabelMask) -> LabelMask:
    """Replicate prediction pixels up to the ground-truth grid."""
    if gt.height % pred.height or gt.width % pred.width:
        raise DimensionError(
            f"ground truth {gt.height}x{gt.width} is not an integer multiple "
            f"of prediction {pred.height}x{pred.width}"
        )
    fh = gt.height // pred.height
    fw = gt.width // pred.width
    up = np.repeat(np.repeat(pred.labels, fh, axis=0), fw, axis=1)
    return LabelMask(up)


def instance_miou(pred: LabelMask, gt: LabelMask) -> EvalReport:
    """IoU-matched instance report; unmatched ground truth scores 0."""
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise DimensionError("prediction and ground truth dimensions differ")
    gt_labels = [int(v) for v in gt.label_values() if v != 0]
    if not gt_labels:
        raise NoInstances("ground truth has no instances")
    pred_labels = [int(v) for v in pred.label_values() if v != 0]

    fscore = f_score(pred, gt)
    if not pred_labels:
        pairs = [(g, None, 0.0) for g in gt_labels]
        return EvalReport(fscore, pairs, 0.0)

    iou = np.zeros((len(gt_labels), len(pred_labels)))
    for i, g in enumerate(gt_labels):
        gm = gt.labels == g
        for j, p in enumerate(pred_labels):
            pm = pred.labels == p
            inter = float(np.logical_and(gm, pm).sum())
            union = float(np.logical_or(gm, pm).sum())
            iou[i, j] = inter / union
    matching = dict(hungarian(iou, maximize=True))

    pairs: list[tuple[int, int | None, float]] = []
    total = 0.0
    for i, g in enumerate(gt_labels):
        if i in matching:
            j = matching[i]
            pairs.append((g, pred_labels[j], float(iou[i, j])))
            total += float(iou[i, j])
        else:
            pairs.append((g, None, 0.0))
    return EvalReport(fscore, pairs, total / len(gt_labels))


def _population_variance(values: list[float]) -> float:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.var())


def variance_ratio_mr(
    fm: FeatureMap,
    gt: LabelMask,
    kind: MetricKind,
    samples_per_instance: int = 10,
    seed: int = 0,
) -> float:
    """Mean intra-instance variance over mean inter-instance variance of
    pairwise similarities, measured on sampled pixels per instance.

    Lower is better: a robust metric keeps same-instance similarities
    tight relative to cross-instance spread.
    """
    if (fm.height, fm.width) != (gt.height, gt.width):
        raise DimensionError("mask dimensions must match the feature map")
    if samples_per_instance < 2:
        raise ConfigError(f"samples_per_instance must be >= 2, got {samples_per_instance}")
    labels = [int(v) for v in gt.label_values() if v != 0]
    if len(labels) < 2:
        raise InsufficientInstances(f"need >= 2 instances, got {len(labels)}")

    flat = fm.data.reshape(-1, fm.channels)
    members = {lab: np.flatnonzero(gt.labels.ravel() == lab) for lab in labels}
    for lab in labels:
        if members[lab].size < samples_per_instance:
            raise InsufficientForeground(
                f"instance {lab} has {members[lab].size} pixels, "
                f"need >= {samples_per_instance}"
            )

    ctx: MahalanobisContext | None = None
    if kind is MetricKind.MAHALANOBIS:
        ctx = covariance_context(fm)

    rng = Lcg64(seed)
    sampled = {}
    for lab in labels:
        picks = rng.sample_indices(members[lab].size, samples_per_instance)
        sampled[lab] = flat[members[lab][picks]]

    intra = []
    for lab in labels:
        pts = sampled[lab]
        sims = [
            metric_sim(kind, pts[a], pts[b], ctx=ctx)
            for a in range(len(pts))
            for b in range(a + 1, len(pts))
        ]
        intra.append(_population_variance(sims))
    inter = []
    for i in range(len(labels)):
        for j in range(i + 1, len(labels)):
            pa, pb = sampled[labels[i]], sampled[labels[j]]
            sims = [metric_sim(kind, u, t, ctx=ctx) for u in pa for t in pb]
            inter.append(_population_variance(sims))

    m_intra = float(np.mean(intra))
    m_inter = float(np.mean(inter))
    if m_inter == 0.0:
        raise DegenerateStatistic("inter-instance similarity variance is zero")
    return m_intra / m_inter


def filter_dataset(
    gt_instances: LabelMask,
    criteria: FilterCriteria = FilterCriteria(),
    mbor: float | None = None,
) -> bool:
    """Keep-or-reject rule for evaluation scenes: reject tiny smallest
    objects, extreme size imbalance, and (when supplied) high occlusion."""
    labels = [int(v) for v in gt_instances.label_values() if v != 0]
    if not labels:
        raise NoInstances("mask has no instances")
    areas = [int((gt_instances.labels == lab).sum()) for lab in labels]
    smallest, largest = min(areas), max(areas)
    if smallest < criteria.min_object_frac * gt_instances.labels.size:
        return False
    if smallest / largest < criteria.min_size_ratio:
        return False
    if mbor is not None and mbor >= criteria.max_mbor:
        return False
    return True
