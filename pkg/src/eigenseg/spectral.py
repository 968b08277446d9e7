"""Graph Laplacians and the low end of their spectrum.

The affinity matrix is treated as a weighted graph; its Laplacian's
smallest eigenvectors are soft segment indicators. The second one (the
Fiedler vector) splits the graph into its two most loosely coupled
halves, which downstream becomes the foreground/background call.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigError, DegenerateGraph, NumericalError
from .similarity import AffinityMatrix


class Normalization(enum.Enum):
    UNNORMALIZED = "unnormalized"
    SYMMETRIC_NORMALIZED = "symmetric"

    @classmethod
    def parse(cls, name: str) -> "Normalization":
        try:
            return cls(name.strip().lower())
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ConfigError(
                f"unknown normalization {name!r}; choose one of: {choices}"
            ) from None


@dataclass(frozen=True)
class Laplacian:
    matrix: np.ndarray  # (n, n) symmetric float64
    normalization: Normalization
    degrees: np.ndarray  # (n,) row sums of the affinity

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class EigenSegments:
    """The k smallest eigenpairs; column j of `vectors` is y_j."""

    values: np.ndarray  # (k,) ascending
    vectors: np.ndarray  # (n, k), unit columns, sign-canonicalized

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def k(self) -> int:
        return self.vectors.shape[1]


def laplacian(
    w: AffinityMatrix, normalization: Normalization = Normalization.SYMMETRIC_NORMALIZED
) -> Laplacian:
    """L = D - W, or its symmetric normalization I - D^-1/2 W D^-1/2.

    Isolated nodes (degree 0) in the normalized form come out as
    identity rows, decoupling them from the low end of the spectrum.
    """
    values = w.values
    degrees = values.sum(axis=1)
    n = values.shape[0]
    if normalization is Normalization.UNNORMALIZED:
        mat = -values.copy()
        np.fill_diagonal(mat, degrees - values.diagonal())
    else:
        inv_sqrt = np.where(degrees > 0, 1.0 / np.sqrt(np.where(degrees > 0, degrees, 1.0)), 0.0)
        scaled = (inv_sqrt[:, None] * values) * inv_sqrt[None, :]
        # The two-sided scaling is not associativity-safe; mirror the
        # upper triangle so L is symmetric to the last bit.
        lower = np.tril_indices(n, k=-1)
        scaled[lower] = scaled.T[lower]
        mat = np.eye(n) - scaled
    return Laplacian(mat, normalization, degrees)


def _canonical_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive.

    Ties go to the lowest index (argmax picks the first maximum).
    """
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        lead = col[np.argmax(np.abs(col))]
        if lead < 0:
            out[:, j] = -col
    return out


def smallest_eigenpairs(lap: Laplacian, k: int) -> EigenSegments:
    """The k algebraically smallest eigenpairs of the Laplacian."""
    n = lap.n
    if not 1 <= k <= n:
        raise ConfigError(f"k must be in [1, {n}], got {k}")
    try:
        vals, vecs = scipy.linalg.eigh(lap.matrix, subset_by_index=(0, k - 1))
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise NumericalError(f"eigendecomposition did not converge: {exc}") from exc
    if not (np.isfinite(vals).all() and np.isfinite(vecs).all()):
        raise NumericalError("eigendecomposition produced non-finite output")
    order = np.argsort(vals, kind="stable")
    return EigenSegments(vals[order], _canonical_signs(vecs[:, order]))


def fiedler(lap: Laplacian) -> tuple[np.ndarray, float]:
    """The second-smallest eigenvector and eigenvalue."""
    if lap.n < 2:
        raise DegenerateGraph(f"Fiedler vector needs >= 2 nodes, got {lap.n}")
    segs = smallest_eigenpairs(lap, 2)
    return segs.vectors[:, 1].copy(), float(segs.values[1])
