"""View algebra on Monna-mapped events.

Event values stay exact (``Fraction``) up to :func:`difference_matrix`,
which rounds each exact difference once to float64.
"""

from __future__ import annotations

from collections import Counter
from fractions import Fraction
from math import lcm
from typing import Sequence

import numpy as np

from .dendrogram import Dendrogram
from .errors import DomainError
from .padic import monna_map


def event_values(d: Dendrogram) -> tuple[Fraction, ...]:
    """Monna value of every leaf, indexed by event id."""
    return tuple(monna_map(c) for c in d.require_codes())


def event_distribution(d: Dendrogram) -> dict[str, Fraction]:
    """Exact probability of each distinct branch code among the leaves."""
    codes = d.require_codes()
    counts = Counter(str(c) for c in codes)
    n = len(codes)
    return {code: Fraction(k, n) for code, k in sorted(counts.items())}


def difference_matrix(values: Sequence[Fraction | float]) -> np.ndarray:
    """``q[i, k] = values[i] - values[k]``.

    Rational inputs are differenced exactly and rounded once, so values that
    differ only beyond double precision still give correctly rounded views.
    """
    if len(values) < 2:
        raise DomainError("need at least 2 event values")
    if not all(isinstance(v, Fraction) for v in values):
        v = np.asarray(values, dtype=float)
        return v[:, None] - v[None, :]
    den = lcm(*(v.denominator for v in values))
    nums = [v.numerator * (den // v.denominator) for v in values]
    if den <= 2**53 and den & (den - 1) == 0:
        # dyadic values on a grid of <= 53 bits: float subtraction is exact
        v = np.array(nums, dtype=float) / den
        return v[:, None] - v[None, :]
    M = np.array(nums, dtype=object)
    diff = M[:, None] - M[None, :]
    return np.array([[x / den for x in row] for row in diff], dtype=float)


def _n(q: np.ndarray) -> int:
    q = np.asarray(q)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise DomainError("difference matrix must be square")
    return q.shape[0]


def distinctiveness(q: np.ndarray, i: int, j: int) -> float:
    """``I_ij = (1/N) sum_{k not in {i,j}} (q[i,k] - q[j,k])^2``."""
    n = _n(q)
    if i == j:
        raise DomainError("distinctiveness needs i != j")
    mask = np.ones(n, dtype=bool)
    mask[[i, j]] = False
    diff = q[i, mask] - q[j, mask]
    return float(np.dot(diff, diff) / n)


def distinctiveness_matrix(q: np.ndarray) -> np.ndarray:
    """All ``I_ij`` at once (zero diagonal)."""
    n = _n(q)
    q = np.asarray(q, dtype=float)
    out = np.zeros((n, n))
    cols = np.arange(n)
    for i in range(n):
        diff = q[i][None, :] - q
        diff[:, i] = 0.0
        diff[cols, cols] = 0.0
        out[i] = np.einsum("jk,jk->j", diff, diff) / n
    out[cols, cols] = 0.0
    return out


def variety(q: np.ndarray, A: float = 1.0) -> float:
    """``v = (A/N^2) sum_{i != j} I_ij`` over ordered pairs."""
    n = _n(q)
    if n < 3:
        raise DomainError("variety needs N >= 3")
    if not A > 0:
        raise DomainError("variety scale A must be positive")
    return float(A * distinctiveness_matrix(q).sum() / n**2)


def mean_momentum(q: np.ndarray, j: int) -> float:
    """Mean view of event ``j``: ``(1/(N-1)) sum_{k != j} q[j, k]``."""
    n = _n(q)
    return float((np.sum(q[j]) - q[j, j]) / (n - 1))


def mean_momenta(q: np.ndarray) -> np.ndarray:
    n = _n(q)
    return (q.sum(axis=1) - np.diag(q)) / (n - 1)


def differences_energy(q: np.ndarray) -> float:
    """``T = (1/(N(N-1))) sum_{j != k} q[j, k]^2``."""
    n = _n(q)
    off = q[~np.eye(n, dtype=bool)]
    return float(np.dot(off, off) / (n * (n - 1)))
