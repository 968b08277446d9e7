"""Pixel-pair similarity kernels and affinity-matrix construction.

Nine interchangeable kernels over feature vectors. Distance-like ones
(L1, L2, Chebyshev, Mahalanobis) and the decorrelation ones (cosine,
correlation) are reversed into similarities via 1/(1+d); Bray-Curtis is
reversed the same way; BoC divides the reversed Bray-Curtis by the
reversed Chebyshev, i.e. BoC = BC_sim * (1 + CH_diss).

Affinities are dense float64. The vectorized row path below performs,
per pair, exactly the same elementwise operations and last-axis
reductions as the scalar kernels, so `build_affinity` is bit-identical
to the sequential double loop over `metric_sim`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DegenerateGraph,
    DimensionError,
    InvalidValue,
)
from .tensor_io import FeatureMap, LabelMask

# Dense n x n float64 gets large quickly: 8192 nodes is a 512 MiB matrix.
MAX_NODES = 8192


class MetricKind(enum.Enum):
    DOT = "dot"
    COSINE = "cosine"
    CORRELATION = "correlation"
    L1 = "l1"
    L2 = "l2"
    CHEBYSHEV = "chebyshev"
    BRAYCURTIS = "braycurtis"
    MAHALANOBIS = "mahalanobis"
    BOC = "boc"

    @classmethod
    def parse(cls, name: str) -> "MetricKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ConfigError(f"unknown metric {name!r}; choose one of: {choices}") from None


@dataclass(frozen=True)
class AffinityMatrix:
    """Symmetric nonnegative edge-weight matrix over the selected pixels."""

    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise DimensionError(f"affinity must be square, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise InvalidValue("affinity contains non-finite entries")
        if (v < 0).any():
            raise InvalidValue("affinity contains negative entries")
        if np.abs(v - v.T).max(initial=0.0) > 1e-12:
            raise InvalidValue("affinity is not symmetric")

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class MahalanobisContext:
    """Whitening transform A with d(u, t) = ||A u - A t||_2.

    A = diag(1/sqrt(lambda)) V^T from the eigendecomposition of the
    ridge-regularized channel covariance, so A^T A is its (pseudo-)
    inverse.
    """

    whiten: np.ndarray  # (C, C) float64

    @property
    def channels(self) -> int:
        return self.whiten.shape[1]


def _as_vector(v, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise DimensionError(f"{name} must be a 1-D vector of length >= 1")
    if not np.isfinite(arr).all():
        raise InvalidValue(f"{name} contains non-finite values")
    return arr


def _check_pair(u, t) -> tuple[np.ndarray, np.ndarray]:
    uu = _as_vector(u, "u")
    tt = _as_vector(t, "t")
    if uu.shape != tt.shape:
        raise DimensionError(f"length mismatch: {uu.size} vs {tt.size}")
    return uu, tt


def bray_curtis(u, t) -> tuple[float, float]:
    """(dissimilarity, similarity); an all-zero denominator means diss 0."""
    uu, tt = _check_pair(u, t)
    num = np.abs(uu - tt).sum()
    den = np.abs(uu + tt).sum()
    diss = num / den if den > 0 else np.float64(0.0)
    return float(diss), float(1.0 / (1.0 + diss))


def chebyshev(u, t) -> tuple[float, float]:
    """(max coordinate gap, its 1/(1+d) reversal)."""
    uu, tt = _check_pair(u, t)
    diss = np.abs(uu - tt).max()
    return float(diss), float(1.0 / (1.0 + diss))


def boc(u, t) -> float:
    """Bray-Curtis similarity relative to Chebyshev similarity."""
    uu, tt = _check_pair(u, t)
    ad = np.abs(uu - tt)
    den = np.abs(uu + tt).sum()
    num = ad.sum()
    bc_diss = num / den if den > 0 else np.float64(0.0)
    bc_sim = 1.0 / (1.0 + bc_diss)
    ch_diss = ad.max()
    return float(bc_sim * (1.0 + ch_diss))


def covariance_context(fm: FeatureMap) -> MahalanobisContext:
    """Whitening context from the per-tensor channel covariance.

    The covariance over all pixels (population divisor) is ridged by
    eps = 1e-6 * trace / C; eigenvalues at or below numerical noise are
    dropped, giving pseudo-inverse behaviour when the ridge vanishes.
    """
    if fm.height * fm.width < 2:
        raise DimensionError("covariance needs at least 2 pixels")
    x = fm.data.reshape(-1, fm.channels)
    centered = x - x.mean(axis=0)
    cov = (centered.T @ centered) / x.shape[0]
    if not np.isfinite(cov).all():
        raise InvalidValue("channel covariance is non-finite")
    eps = 1e-6 * np.trace(cov) / fm.channels
    lam, vec = np.linalg.eigh(cov + eps * np.eye(fm.channels))
    lam_max = float(lam[-1])
    if lam_max <= 0.0:
        # Zero covariance: all pixels identical, every pairwise distance 0.
        inv_sqrt = np.zeros_like(lam)
    else:
        cutoff = lam_max * 1e-12
        safe = np.where(lam > cutoff, lam, 1.0)
        inv_sqrt = np.where(lam > cutoff, 1.0 / np.sqrt(safe), 0.0)
    whiten = inv_sqrt[:, None] * vec.T
    return MahalanobisContext(whiten)


def _whiten_one(ctx: MahalanobisContext, v: np.ndarray) -> np.ndarray:
    # (A * v).sum(-1) rather than A @ v: the matrix path whitens node
    # blocks with the identical broadcast + last-axis reduction.
    return (ctx.whiten * v).sum(axis=-1)


def _whiten_block(ctx: MahalanobisContext, nodes: np.ndarray) -> np.ndarray:
    """Whiten every node once; the pairwise part is then the L2 path.

    Chunked so the (m, C, C) broadcast intermediate stays around 128 MiB.
    """
    c = ctx.channels
    out = np.empty_like(nodes)
    step = max(1, (1 << 24) // (c * c))
    for start in range(0, nodes.shape[0], step):
        chunk = nodes[start : start + step]
        out[start : start + step] = (ctx.whiten[None, :, :] * chunk[:, None, :]).sum(axis=-1)
    return out


def metric_sim(kind: MetricKind, u, t, ctx: MahalanobisContext | None = None) -> float:
    """Similarity of one vector pair under the chosen kernel."""
    uu, tt = _check_pair(u, t)
    if kind is MetricKind.DOT:
        s = (uu * tt).sum()
        return float(np.maximum(s, 0.0))
    if kind is MetricKind.COSINE:
        num = (uu * tt).sum()
        den = np.sqrt((uu * uu).sum()) * np.sqrt((tt * tt).sum())
        cos = num / den if den > 0 else np.float64(0.0)
        d = 1.0 - cos
        return float(1.0 / (1.0 + d))
    if kind is MetricKind.CORRELATION:
        du = uu - uu.mean()
        dt = tt - tt.mean()
        num = (du * dt).sum()
        den = np.sqrt((du * du).sum()) * np.sqrt((dt * dt).sum())
        r = num / den if den > 0 else np.float64(0.0)
        d = 1.0 - r
        return float(1.0 / (1.0 + d))
    if kind is MetricKind.L1:
        d = np.abs(uu - tt).sum()
        return float(1.0 / (1.0 + d))
    if kind is MetricKind.L2:
        diff = uu - tt
        d = np.sqrt((diff * diff).sum())
        return float(1.0 / (1.0 + d))
    if kind is MetricKind.CHEBYSHEV:
        return chebyshev(uu, tt)[1]
    if kind is MetricKind.BRAYCURTIS:
        return bray_curtis(uu, tt)[1]
    if kind is MetricKind.MAHALANOBIS:
        if ctx is None:
            raise ConfigError("MAHALANOBIS requires a covariance context")
        if ctx.channels != uu.size:
            raise DimensionError(
                f"covariance context is for {ctx.channels} channels, vectors have {uu.size}"
            )
        zu = _whiten_one(ctx, uu)
        zt = _whiten_one(ctx, tt)
        diff = zu - zt
        d = np.sqrt((diff * diff).sum())
        return float(1.0 / (1.0 + d))
    if kind is MetricKind.BOC:
        return boc(uu, tt)
    raise ConfigError(f"unknown metric kind {kind!r}")


def _select_nodes(
    fm: FeatureMap, mask: LabelMask | None
) -> tuple[np.ndarray, np.ndarray]:
    """Node feature rows plus their (h, w) coordinates, row-major."""
    flat = fm.data.reshape(-1, fm.channels)
    hh, ww = np.meshgrid(
        np.arange(fm.height, dtype=np.int64),
        np.arange(fm.width, dtype=np.int64),
        indexing="ij",
    )
    coords = np.stack([hh.ravel(), ww.ravel()], axis=1)
    if mask is None:
        return flat, coords
    if (mask.height, mask.width) != (fm.height, fm.width):
        raise DimensionError("mask dimensions must match the feature map")
    keep = mask.labels.ravel() > 0
    return np.ascontiguousarray(flat[keep]), coords[keep]


def _row_block(kind: MetricKind, f: np.ndarray, rest: np.ndarray) -> np.ndarray:
    """Similarities of node f against the block `rest`, one pass.

    Performs the same elementwise operations and last-axis reductions
    as metric_sim does per pair, so each output entry is bit-identical
    to the scalar kernel.
    """
    if kind is MetricKind.DOT:
        return np.maximum((rest * f).sum(axis=-1), 0.0)
    if kind is MetricKind.L1:
        d = np.abs(rest - f).sum(axis=-1)
        return 1.0 / (1.0 + d)
    if kind in (MetricKind.L2, MetricKind.MAHALANOBIS):
        diff = rest - f
        d = np.sqrt((diff * diff).sum(axis=-1))
        return 1.0 / (1.0 + d)
    if kind is MetricKind.CHEBYSHEV:
        d = np.abs(rest - f).max(axis=-1)
        return 1.0 / (1.0 + d)
    if kind is MetricKind.BRAYCURTIS:
        num = np.abs(rest - f).sum(axis=-1)
        den = np.abs(rest + f).sum(axis=-1)
        diss = np.zeros_like(num)
        np.divide(num, den, out=diss, where=den > 0)
        return 1.0 / (1.0 + diss)
    if kind is MetricKind.BOC:
        ad = np.abs(rest - f)
        den = np.abs(rest + f).sum(axis=-1)
        num = ad.sum(axis=-1)
        diss = np.zeros_like(num)
        np.divide(num, den, out=diss, where=den > 0)
        bc_sim = 1.0 / (1.0 + diss)
        ch = ad.max(axis=-1)
        return bc_sim * (1.0 + ch)
    raise ConfigError(f"no row kernel for {kind!r}")


def _normalized_rows(kind: MetricKind, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-node rows and scale factors for the cosine/correlation paths."""
    if kind is MetricKind.COSINE:
        rows = nodes
    else:
        rows = nodes - nodes.mean(axis=-1, keepdims=True)
    scale = np.sqrt((rows * rows).sum(axis=-1))
    return rows, scale


def build_affinity(
    fm: FeatureMap,
    kind: MetricKind,
    mask: LabelMask | None = None,
    ctx: MahalanobisContext | None = None,
) -> tuple[AffinityMatrix, np.ndarray]:
    """Dense affinity over the pixels selected by `mask` (all if None).

    Returns the matrix plus an (n, 2) int64 table mapping node index to
    its (h, w) pixel. Each unordered pair's kernel is evaluated once on
    the upper triangle and mirrored.
    """
    nodes, coords = _select_nodes(fm, mask)
    n = nodes.shape[0]
    if n < 2:
        raise DegenerateGraph(f"affinity graph needs >= 2 nodes, got {n}")
    if n > MAX_NODES:
        raise ConfigError(
            f"{n} nodes would need a {n}x{n} dense affinity; limit is {MAX_NODES}"
        )

    w = np.empty((n, n), dtype=np.float64)
    if kind in (MetricKind.COSINE, MetricKind.CORRELATION):
        rows, scale = _normalized_rows(kind, nodes)
        for i in range(n):
            num = (rows[i:] * rows[i]).sum(axis=-1)
            den = scale[i] * scale[i:]
            cos = np.zeros_like(num)
            np.divide(num, den, out=cos, where=den > 0)
            d = 1.0 - cos
            w[i, i:] = 1.0 / (1.0 + d)
    else:
        if kind is MetricKind.MAHALANOBIS:
            if ctx is None:
                ctx = covariance_context(fm)
            if ctx.channels != fm.channels:
                raise DimensionError(
                    f"covariance context is for {ctx.channels} channels, map has {fm.channels}"
                )
            nodes = _whiten_block(ctx, nodes)
        for i in range(n):
            w[i, i:] = _row_block(kind, nodes[i], nodes[i:])
    lower = np.tril_indices(n, k=-1)
    w[lower] = w.T[lower]
    return AffinityMatrix(w), coords
