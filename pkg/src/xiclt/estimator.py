"""Chatterjee's rank correlation xi_n.

The sample is sorted by X, with ties in X put in uniformly random order;
then r_i counts the Y' values <= Y'_i and l_i counts those >= Y'_i, and

    xi_n = 1 - n * sum_i |r_{i+1} - r_i| / (2 * sum_i l_i (n - l_i)).

Both sums are accumulated as exact integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.stats import rankdata

from ._rng import STREAM_TIEBREAK, SeedLike, as_generator
from .errors import AllYEqual
from .model import Sample

# beyond this n, sum l_i (n - l_i) ~ n^3/6 no longer fits in int64
_INT64_SAFE_N = 3_000_000


@dataclass(frozen=True, eq=False)
class RankData:
    """Sample reordered by X, with its Y-rank counts.

    ``perm`` is the 0-based permutation applied to the original sample, so
    ``y_prime == sample.y[perm]``.
    """

    y_prime: np.ndarray
    r: np.ndarray
    l: np.ndarray
    perm: np.ndarray
    x_prime: np.ndarray | None = None

    @property
    def n(self) -> int:
        return int(self.y_prime.size)

    @property
    def pairs(self) -> np.ndarray:
        """Consecutive pairs (Y'_i, Y'_{i+1}), shape (n - 1, 2)."""
        return np.column_stack([self.y_prime[:-1], self.y_prime[1:]])


def tiebreak_order(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Permutation sorting ``x`` ascending with ties in uniformly random order."""
    return np.lexsort((rng.random(x.shape), x))


def rank_counts(y_prime: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``r_i = #{j: y_j <= y_i}`` and ``l_i = #{j: y_j >= y_i}``."""
    s = np.sort(y_prime)
    r = np.searchsorted(s, y_prime, side="right").astype(np.int64)
    l = (y_prime.size - np.searchsorted(s, y_prime, side="left")).astype(np.int64)
    return r, l


def reorder_by_x(sample: Sample, seed: SeedLike = 0) -> RankData:
    """Sort the sample by X (random tie-breaking from ``seed``) and rank Y."""
    rng = as_generator(seed, STREAM_TIEBREAK)
    perm = tiebreak_order(sample.x, rng)
    yp = sample.y[perm]
    r, l = rank_counts(yp)
    return RankData(yp, r, l, perm, sample.x[perm])


def xi_sums(rd: RankData) -> tuple[int, int]:
    """Exact integer numerator ``sum |r_{i+1} - r_i|`` and denominator ``sum l_i (n - l_i)``."""
    n = rd.n
    if n > _INT64_SAFE_N:
        r = rd.r.astype(object)
        l = rd.l.astype(object)
        return int(np.abs(np.diff(r)).sum()), int((l * (n - l)).sum())
    num = int(np.abs(np.diff(rd.r)).sum())
    den = int((rd.l * (n - rd.l)).sum())
    return num, den


def xi_n(rd: RankData) -> float:
    """Chatterjee's coefficient from ranked data.

    Raises
    ------
    AllYEqual
        If every Y value is the same (zero denominator).
    """
    num, den = xi_sums(rd)
    if den == 0:
        raise AllYEqual("all Y values are equal; xi_n is undefined")
    return 1.0 - (rd.n * num) / (2 * den)


def xi_n_exact(rd: RankData) -> Fraction:
    """The same value as :func:`xi_n`, as an exact fraction."""
    num, den = xi_sums(rd)
    if den == 0:
        raise AllYEqual("all Y values are equal; xi_n is undefined")
    return 1 - Fraction(rd.n * num, 2 * den)


def xicor(x, y, seed: SeedLike = 0) -> float:
    """Convenience wrapper: ``xi_n`` of the pairs ``(x, y)``."""
    return xi_n(reorder_by_x(Sample(x, y), seed))


def xi_n_batch(x: np.ndarray, y: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise ``xi_n`` for stacked samples.

    ``x``, ``y`` and the tie-break keys ``u`` have shape (B, m). Rows whose Y
    values are all equal give NaN.
    """
    order = np.lexsort((u, x), axis=-1)
    yp = np.take_along_axis(y, order, axis=-1)
    m = yp.shape[-1]
    r = rankdata(yp, method="max", axis=-1).astype(np.int64)
    l = m - rankdata(yp, method="min", axis=-1).astype(np.int64) + 1
    num = np.abs(np.diff(r, axis=-1)).sum(axis=-1)
    den = (l * (m - l)).sum(axis=-1)
    out = np.full(yp.shape[0], np.nan)
    ok = den > 0
    out[ok] = 1.0 - (m * num[ok]) / (2.0 * den[ok])
    return out
