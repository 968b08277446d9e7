"""Independent reference implementations used to cross-check the package.

Everything here is written from the documented contracts using plain
Python (math.fsum accumulation) or textbook algorithms, deliberately
avoiding the vectorized code paths of the package itself, so agreement
between the two is evidence of correctness rather than repetition.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

# --- 64-bit LCG (documented recurrence, re-derived) ------------------------

LCG_MULT = 6364136223846793005
LCG_INC = 1442695040888963407
LCG_MASK = (1 << 64) - 1


def lcg_states(seed: int, count: int) -> list[int]:
    """First `count` raw states after the documented one-step seed mix."""
    state = ((seed & LCG_MASK) * LCG_MULT + LCG_INC) & LCG_MASK
    out = []
    for _ in range(count):
        state = (state * LCG_MULT + LCG_INC) & LCG_MASK
        out.append(state)
    return out


def lcg_doubles(seed: int, count: int) -> list[float]:
    return [(s >> 11) * 2.0**-53 for s in lcg_states(seed, count)]


# --- similarity kernels (fsum accumulation) ---------------------------------


def sim_dot(u, t):
    return max(math.fsum(a * b for a, b in zip(u, t)), 0.0)


def sim_l1(u, t):
    d = math.fsum(abs(a - b) for a, b in zip(u, t))
    return 1.0 / (1.0 + d)


def sim_l2(u, t):
    d = math.sqrt(math.fsum((a - b) ** 2 for a, b in zip(u, t)))
    return 1.0 / (1.0 + d)


def sim_chebyshev(u, t):
    d = max(abs(a - b) for a, b in zip(u, t))
    return 1.0 / (1.0 + d)


def bc_dissimilarity(u, t):
    num = math.fsum(abs(a - b) for a, b in zip(u, t))
    den = math.fsum(abs(a + b) for a, b in zip(u, t))
    return num / den if den > 0 else 0.0


def sim_braycurtis(u, t):
    return 1.0 / (1.0 + bc_dissimilarity(u, t))


def sim_boc(u, t):
    ch = max(abs(a - b) for a, b in zip(u, t))
    return sim_braycurtis(u, t) * (1.0 + ch)


def sim_cosine(u, t):
    num = math.fsum(a * b for a, b in zip(u, t))
    den = math.sqrt(math.fsum(a * a for a in u)) * math.sqrt(
        math.fsum(b * b for b in t)
    )
    cos = num / den if den > 0 else 0.0
    return 1.0 / (1.0 + (1.0 - cos))


def sim_correlation(u, t):
    mu = math.fsum(u) / len(u)
    mt = math.fsum(t) / len(t)
    du = [a - mu for a in u]
    dt = [b - mt for b in t]
    num = math.fsum(a * b for a, b in zip(du, dt))
    den = math.sqrt(math.fsum(a * a for a in du)) * math.sqrt(
        math.fsum(b * b for b in dt)
    )
    r = num / den if den > 0 else 0.0
    return 1.0 / (1.0 + (1.0 - r))


def sim_mahalanobis(whiten, u, t):
    """1/(1+d) with d = ||A u - A t||_2 for a given whitening matrix A."""
    zu = [math.fsum(row[i] * u[i] for i in range(len(u))) for row in whiten]
    zt = [math.fsum(row[i] * t[i] for i in range(len(t))) for row in whiten]
    d = math.sqrt(math.fsum((a - b) ** 2 for a, b in zip(zu, zt)))
    return 1.0 / (1.0 + d)


# --- per-channel statistics --------------------------------------------------


def oracle_pdf(values, bins: int) -> list[float]:
    """Equal-width histogram over [min, max] as a probability vector.

    The maximum lands in the last bin; a constant sequence puts all mass
    in bin 0.
    """
    vals = [float(v) for v in values]
    lo = min(vals)
    hi = max(vals)
    if lo == hi:
        return [1.0] + [0.0] * (bins - 1)
    counts = [0] * bins
    for v in vals:
        if v >= hi:
            b = bins - 1
        else:
            b = int((v - lo) / (hi - lo) * bins)
            if b > bins - 1:
                b = bins - 1
        counts[b] += 1
    return [c / len(vals) for c in counts]


def oracle_entropy(pdf) -> float:
    return -math.fsum(p * math.log2(p) for p in pdf if p > 0)


def oracle_std(values) -> float:
    vals = [float(v) for v in values]
    mean = math.fsum(vals) / len(vals)
    var = math.fsum((v - mean) ** 2 for v in vals) / len(vals)
    return math.sqrt(var)


# --- cyclic Jacobi eigensolver ------------------------------------------------


def jacobi_eigensystem(matrix, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and eigenvectors of a symmetric matrix by
    cyclic Jacobi rotations. Textbook two-sided Givens updates; converges
    to machine precision for the small matrices used in tests.
    """
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return a.ravel().copy(), v
    scale = math.sqrt(float((a * a).sum()))
    if scale == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = math.sqrt(max(float((a * a).sum() - (np.diag(a) ** 2).sum()), 0.0))
        if off <= 1e-14 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = float(a[p, q])
                if apq == 0.0:
                    continue
                diff = float(a[q, q]) - float(a[p, p])
                if abs(diff) > 1e18 * abs(apq):
                    # asymptotic tangent 1/(2*theta); avoids overflowing theta^2
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (
                        abs(theta) + math.sqrt(theta * theta + 1.0)
                    )
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    order = np.argsort(np.diag(a), kind="stable")
    return np.diag(a)[order].copy(), v[:, order].copy()


# --- brute-force assignment ---------------------------------------------------


def brute_force_assignment(cost, maximize: bool = False) -> list[tuple[int, int]]:
    """Exhaustive optimal assignment; ties resolved to the smallest
    (row, col) sequence. Intended for integer-valued matrices, where
    total comparisons are exact.
    """
    mat = np.asarray(cost, dtype=np.float64)
    k, m = mat.shape
    n = min(k, m)
    best_pairs = None
    best_total = None
    for rows in itertools.combinations(range(k), n):
        for cols in itertools.permutations(range(m), n):
            pairs = sorted(zip(rows, cols))
            total = math.fsum(float(mat[r, c]) for r, c in pairs)
            if best_pairs is None:
                best_pairs, best_total = pairs, total
                continue
            if maximize:
                improved = total > best_total
            else:
                improved = total < best_total
            if improved or (total == best_total and pairs < best_pairs):
                best_pairs, best_total = pairs, total
    return best_pairs


# --- misc ----------------------------------------------------------------------


def midpoint_disk_area(r: int) -> int:
    """Pixel count of the disk d^2 <= r(r+1), found by row counting."""
    total = 0
    for i in range(-r, r + 1):
        rem = r * (r + 1) - i * i
        j = int(math.isqrt(rem)) if rem >= 0 else -1
        if j >= 0:
            total += 2 * j + 1
    return total
