"""End-to-end segmentation: Fiedler foreground/background split and
eigensegment clustering into instances.

Foreground/background: prune noisy channels, build the affinity graph
over all pixels, threshold the Fiedler vector, then clean the mask with
a median filter and a border-occupancy label swap.

Instances: prune by entropy then by deviation, restrict the graph to
foreground pixels, embed each pixel by eigenvectors y_1..y_e of the
Laplacian, and cluster the embedding with deterministic k-means.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .channel_select import DEFAULT_BINS, dcr_select, ncr_select
from .errors import (
    ConfigError,
    InsufficientForeground,
    InvalidValue,
)
from .rng import Lcg64
from .similarity import MetricKind, build_affinity
from .spectral import EigenSegments, Normalization, fiedler, laplacian, smallest_eigenpairs
from .tensor_io import FeatureMap, LabelMask

DEFAULT_KEEP_N = 60


class ThresholdRule(enum.Enum):
    ZERO = "zero"
    MEAN = "mean"

    @classmethod
    def parse(cls, name: str) -> "ThresholdRule":
        try:
            return cls(name.strip().lower())
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ConfigError(f"unknown threshold rule {name!r}; choose one of: {choices}") from None


@dataclass(frozen=True)
class KmeansParams:
    restarts: int = 10
    max_iter: int = 300
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ConfigError(f"restarts must be >= 1, got {self.restarts}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.tol >= 0:
            raise ConfigError(f"tol must be >= 0, got {self.tol}")


@dataclass(frozen=True)
class FgBgConfig:
    """keep_m None means C // 3 (at least 1), resolved per feature map."""

    keep_m: int | None = None
    bins: int = DEFAULT_BINS
    metric: MetricKind = MetricKind.DOT
    normalization: Normalization = Normalization.SYMMETRIC_NORMALIZED
    post_process: bool = True
    threshold_rule: ThresholdRule = ThresholdRule.ZERO

    def __post_init__(self):
        if self.bins < 2:
            raise ConfigError(f"bins must be >= 2, got {self.bins}")
        if self.keep_m is not None and self.keep_m < 1:
            raise ConfigError(f"keep_m must be >= 1, got {self.keep_m}")


@dataclass(frozen=True)
class InstanceConfig:
    """keep_m/keep_n default to C // 3 and min(60, M), resolved per map."""

    k: int
    keep_m: int | None = None
    keep_n: int | None = None
    bins: int = DEFAULT_BINS
    metric: MetricKind = MetricKind.BOC
    normalization: Normalization = Normalization.SYMMETRIC_NORMALIZED
    eig_count: int = 4
    kmeans: KmeansParams = field(default_factory=KmeansParams)

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.eig_count < 1:
            raise ConfigError(f"eig_count must be >= 1, got {self.eig_count}")
        if self.bins < 2:
            raise ConfigError(f"bins must be >= 2, got {self.bins}")
        if self.keep_m is not None and self.keep_m < 1:
            raise ConfigError(f"keep_m must be >= 1, got {self.keep_m}")
        if self.keep_n is not None and self.keep_n < 1:
            raise ConfigError(f"keep_n must be >= 1, got {self.keep_n}")
        if self.keep_m is not None and self.keep_n is not None and self.keep_n > self.keep_m:
            raise ConfigError(
                f"keep_n ({self.keep_n}) must not exceed keep_m ({self.keep_m})"
            )


def resolve_keep_m(keep_m: int | None, channels: int) -> int:
    return keep_m if keep_m is not None else max(1, channels // 3)


def _resolve_keep_n(keep_n: int | None, keep_m: int) -> int:
    return keep_n if keep_n is not None else min(DEFAULT_KEEP_N, keep_m)


def _require_binary(mask: LabelMask, name: str) -> None:
    if int(mask.labels.max(initial=0)) > 1:
        raise InvalidValue(f"{name} must be binary (labels 0/1)")


def post_process(mask: LabelMask) -> LabelMask:
    """5x5 majority filter with reflected borders, then a label swap
    whenever foreground claims strictly more than half the border ring."""
    _require_binary(mask, "mask")
    arr = mask.labels
    padded = np.pad(arr, 2, mode="symmetric")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (5, 5))
    filtered = (windows.sum(axis=(-2, -1)) >= 13).astype(np.int64)

    border = np.zeros_like(filtered, dtype=bool)
    border[0, :] = border[-1, :] = True
    border[:, 0] = border[:, -1] = True
    fg_on_border = int(filtered[border].sum())
    if 2 * fg_on_border > int(border.sum()):
        filtered = 1 - filtered
    return LabelMask(filtered)


def fgbg_segment(fm: FeatureMap, cfg: FgBgConfig) -> tuple[LabelMask, EigenSegments]:
    """Binary foreground mask from the sign of the Fiedler vector."""
    m = resolve_keep_m(cfg.keep_m, fm.channels)
    reduced, _ = ncr_select(fm, m, cfg.bins)
    w, _ = build_affinity(reduced, cfg.metric)
    lap = laplacian(w, cfg.normalization)
    segs = smallest_eigenpairs(lap, 2)
    y1 = segs.vectors[:, 1]
    tau = 0.0 if cfg.threshold_rule is ThresholdRule.ZERO else float(y1.mean())
    mask = LabelMask((y1 > tau).astype(np.int64).reshape(fm.height, fm.width))
    if cfg.post_process:
        mask = post_process(mask)
    return mask, segs


def kmeans(points: np.ndarray, k: int, params: KmeansParams) -> np.ndarray:
    """Deterministic k-means: seeded k-means++ starts, Lloyd updates,
    best of `restarts` runs by within-cluster sum of squares."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ConfigError(f"points must be 2-D, got shape {pts.shape}")
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k must be in [1, {n}], got {k}")
    rng = Lcg64(params.seed)
    best_labels: np.ndarray | None = None
    best_wcss = np.inf
    for _ in range(params.restarts):
        centers = _plusplus_seed(pts, k, rng)
        labels, wcss = _lloyd(pts, centers, params.max_iter, params.tol)
        if wcss < best_wcss:
            best_wcss = wcss
            best_labels = labels
    assert best_labels is not None
    return best_labels


def _plusplus_seed(pts: np.ndarray, k: int, rng: Lcg64) -> np.ndarray:
    n = pts.shape[0]
    centers = np.empty((k, pts.shape[1]), dtype=np.float64)
    centers[0] = pts[rng.randint(n)]
    if k == 1:
        return centers
    d2 = ((pts - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = rng.randint(n)
        else:
            target = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), target, side="right"))
            idx = min(idx, n - 1)
        centers[j] = pts[idx]
        if j + 1 < k:
            d2 = np.minimum(d2, ((pts - centers[j]) ** 2).sum(axis=1))
    return centers


def _assign(pts: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
    return d2.argmin(axis=1)


def _lloyd(
    pts: np.ndarray, centers: np.ndarray, max_iter: int, tol: float
) -> tuple[np.ndarray, float]:
    k = centers.shape[0]
    centers = centers.copy()
    labels = _assign(pts, centers)
    for _ in range(max_iter):
        labels = _repair_empty(pts, centers, labels, k)
        new_centers = np.empty_like(centers)
        for c in range(k):
            new_centers[c] = pts[labels == c].mean(axis=0)
        shift = np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max()
        centers = new_centers
        labels = _assign(pts, centers)
        if shift < tol:
            break
    labels = _repair_empty(pts, centers, labels, k)
    wcss = float(((pts - centers[labels]) ** 2).sum())
    return labels, wcss

def _repair_empty(
    pts: np.ndarray, centers: np.ndarray, labels: np.ndarray, k: int
) -> np.ndarray:
    """Give each empty cluster the farthest point of the largest one."""
    labels = labels.copy()
    for c in range(k):
        if (labels == c).any():
            continue
        counts = np.bincount(labels, minlength=k)
        donor = int(counts.argmax())
        members = np.flatnonzero(labels == donor)
        center = pts[members].mean(axis=0)
        far = members[int(((pts[members] - center) ** 2).sum(axis=1).argmax())]
        labels[far] = c
        centers[c] = pts[far]
    return labels


def _canonical_instance_labels(out: np.ndarray, k: int) -> np.ndarray:
    """Renumber 1..k by descending size; ties by smallest member pixel."""
    flat = out.ravel()
    order = []
    for lab in range(1, k + 1):
        members = np.flatnonzero(flat == lab)
        if members.size == 0:
            continue
        order.append((-members.size, int(members[0]), lab))
    remap = np.zeros(k + 1, dtype=np.int64)
    for new, (_, _, old) in enumerate(sorted(order), start=1):
        remap[old] = new
    return remap[out]


def instance_segment(fm: FeatureMap, fg: LabelMask, cfg: InstanceConfig) -> LabelMask:
    """Cluster foreground pixels into k instances (labels 1..k, bg 0)."""
    _require_binary(fg, "foreground mask")
    if (fg.height, fg.width) != (fm.height, fm.width):
        raise InvalidValue("foreground mask dimensions must match the feature map")
    n_fg = int((fg.labels > 0).sum())
    if n_fg < cfg.k:
        raise InsufficientForeground(
            f"{n_fg} foreground pixels cannot host {cfg.k} instances"
        )

    out = np.zeros((fm.height, fm.width), dtype=np.int64)
    if n_fg == 1:
        out[fg.labels > 0] = 1
        return LabelMask(out)

    m = resolve_keep_m(cfg.keep_m, fm.channels)
    reduced, _ = ncr_select(fm, m, cfg.bins)
    n = _resolve_keep_n(cfg.keep_n, m)
    second, _ = dcr_select(reduced, n)

    w, coords = build_affinity(second, cfg.metric, mask=fg)
    lap = laplacian(w, cfg.normalization)
    eig = min(cfg.eig_count, n_fg - 1)
    segs = smallest_eigenpairs(lap, 1 + eig)
    embedding = segs.vectors[:, 1 : 1 + eig]
    labels = kmeans(embedding, cfg.k, cfg.kmeans)

    out[coords[:, 0], coords[:, 1]] = labels + 1
    return LabelMask(_canonical_instance_labels(out, cfg.k))
