"""Channel pruning of self-supervised feature maps.

Two complementary filters:

* entropy-based reduction — keep the M channels whose 30-bin histogram
  has the lowest Shannon entropy (noisy channels look uniform, so they
  rank high and are dropped);
* deviation-based reduction — keep the N channels with the highest
  population standard deviation (flat channels carry no instance
  contrast).

Scores are computed on the raw loaded features, before any affinity
construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, InsufficientInstances
from .tensor_io import FeatureMap, LabelMask

DEFAULT_BINS = 30


@dataclass(frozen=True)
class ChannelScore:
    channel_index: int
    score: float


@dataclass(frozen=True)
class ReductionConfig:
    """Knobs for the two-stage reduction. keep_N <= keep_M <= C."""

    bins: int = DEFAULT_BINS
    keep_m: int | None = None
    keep_n: int | None = None

    def __post_init__(self):
        if self.bins < 2:
            raise ConfigError(f"bins must be >= 2, got {self.bins}")
        if self.keep_m is not None and self.keep_m < 1:
            raise ConfigError(f"keep_m must be >= 1, got {self.keep_m}")
        if self.keep_n is not None and self.keep_n < 1:
            raise ConfigError(f"keep_n must be >= 1, got {self.keep_n}")
        if self.keep_m is not None and self.keep_n is not None and self.keep_n > self.keep_m:
            raise ConfigError(f"keep_n ({self.keep_n}) must not exceed keep_m ({self.keep_m})")


def channel_histogram(fm: FeatureMap, c: int, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Probability vector over `bins` equal-width bins spanning [min, max].

    The max-valued pixel lands in the last bin. A constant channel puts
    all mass in bin 0. Entries sum to 1 (counts divided by H*W).
    """
    if not 0 <= c < fm.channels:
        raise ConfigError(f"channel {c} out of range [0, {fm.channels})")
    if bins < 2:
        raise ConfigError(f"bins must be >= 2, got {bins}")
    values = fm.data[:, :, c].ravel()
    lo, hi = float(values.min()), float(values.max())
    pdf = np.zeros(bins, dtype=np.float64)
    if lo == hi:
        pdf[0] = 1.0
        return pdf
    counts, _ = np.histogram(values, bins=bins, range=(lo, hi))
    return counts / values.size


def channel_entropy(pdf: np.ndarray) -> float:
    """Shannon entropy in bits; zero-probability bins contribute nothing."""
    p = np.asarray(pdf, dtype=np.float64)
    pos = p[p > 0]
    return float(-(pos * np.log2(pos)).sum())


def channel_std(fm: FeatureMap, c: int) -> float:
    """Population standard deviation of channel c (divisor H*W)."""
    if not 0 <= c < fm.channels:
        raise ConfigError(f"channel {c} out of range [0, {fm.channels})")
    return float(fm.data[:, :, c].std())


def entropy_scores(fm: FeatureMap, bins: int = DEFAULT_BINS) -> list[ChannelScore]:
    return [
        ChannelScore(c, channel_entropy(channel_histogram(fm, c, bins)))
        for c in range(fm.channels)
    ]


def std_scores(fm: FeatureMap) -> list[ChannelScore]:
    return [ChannelScore(c, channel_std(fm, c)) for c in range(fm.channels)]


def _keep(scores: np.ndarray, count: int, largest: bool) -> np.ndarray:
    # Stable argsort breaks score ties by ascending channel index.
    order = np.argsort(-scores if largest else scores, kind="stable")
    return np.sort(order[:count])


def ncr_select(
    fm: FeatureMap, keep_m: int, bins: int = DEFAULT_BINS
) -> tuple[FeatureMap, list[int]]:
    """Keep the keep_m lowest-entropy channels, original order preserved."""
    if not 1 <= keep_m <= fm.channels:
        raise ConfigError(f"keep_m must be in [1, {fm.channels}], got {keep_m}")
    scores = np.array([s.score for s in entropy_scores(fm, bins)])
    kept = _keep(scores, keep_m, largest=False)
    return FeatureMap(fm.data[:, :, kept]), [int(i) for i in kept]


def dcr_select(fm: FeatureMap, keep_n: int) -> tuple[FeatureMap, list[int]]:
    """Keep the keep_n highest-std channels, original order preserved."""
    if not 1 <= keep_n <= fm.channels:
        raise ConfigError(f"keep_n must be in [1, {fm.channels}], got {keep_n}")
    scores = np.array([s.score for s in std_scores(fm)])
    kept = _keep(scores, keep_n, largest=True)
    return FeatureMap(fm.data[:, :, kept]), [int(i) for i in kept]


def channel_delta(fm: FeatureMap, instances: LabelMask, c: int) -> float:
    """Mean absolute pairwise gap between per-instance channel means.

    Diagnostic for how well channel c separates instances: averages
    |mean(c over instance i) - mean(c over instance j)| over unordered
    instance pairs.
    """
    if (fm.height, fm.width) != (instances.height, instances.width):
        raise DimensionError("instance mask dimensions must match the feature map")
    if not 0 <= c < fm.channels:
        raise ConfigError(f"channel {c} out of range [0, {fm.channels})")
    labels = [v for v in instances.label_values() if v != 0]
    if len(labels) < 2:
        raise InsufficientInstances(f"need >= 2 instances, got {len(labels)}")
    chan = fm.data[:, :, c]
    means = [float(chan[instances.labels == lab].mean()) for lab in labels]
    gaps = [
        abs(means[i] - means[j])
        for i in range(len(means))
        for j in range(i + 1, len(means))
    ]
    return float(np.mean(gaps))
