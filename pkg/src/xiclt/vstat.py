"""V-statistics over the consecutive pairs (Y'_i, Y'_{i+1}) of X-sorted data.

The two built-in kernels rebuild the numerator and denominator of
``1 - xi_n``::

    h1((s1, s2), (t1, t2)) = sgn(s2 - s1) * (1{t1 <= s2} - 1{t1 <= s1})
    h2(s, t, u)            = 1{t >= s} * 1{u < s}

``h2`` acts on single observations; :data:`H2_LIFTED` is its arity-3 pair
kernel that reads only the first coordinate of each pair.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ArityTooLargeForN
from .estimator import RankData, xi_n, xi_sums

# generic summation for arity >= 3
MAX_N_HIGH_ARITY = 400
MAX_TERMS_HIGH_ARITY = 2 * 10**8
_BLOCK = 2_000_000


def kernel_h1(s, t):
    """``sgn(s2 - s1) * (1{t1 <= s2} - 1{t1 <= s1})``; ``t2`` is ignored.

    Equivalently ``1{min(s1, s2) < t1 <= max(s1, s2)}``. Arguments are pairs,
    or arrays of pairs with a trailing axis of length 2.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    s1, s2, t1 = s[..., 0], s[..., 1], t[..., 0]
    sign = np.sign(s2 - s1).astype(np.int64)
    return sign * ((t1 <= s2).astype(np.int64) - (t1 <= s1).astype(np.int64))


def kernel_h2(s, t, u):
    """``1{t >= s} * 1{u < s}`` on single observations."""
    s = np.asarray(s, dtype=float)
    return ((np.asarray(t) >= s) & (np.asarray(u) < s)).astype(np.int64)


def _h2_lifted(a, b, c):
    return kernel_h2(np.asarray(a)[..., 0], np.asarray(b)[..., 0], np.asarray(c)[..., 0])


def _h1_sum_counting(pairs: np.ndarray) -> int:
    first = np.sort(pairs[:, 0])
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    counts = np.searchsorted(first, hi, side="right") - np.searchsorted(first, lo, side="right")
    return int(counts.sum())


def _h2_sum_counting(values: np.ndarray) -> int:
    s = np.sort(values)
    below = np.searchsorted(s, values, side="left").astype(np.int64)
    at_or_above = values.size - below
    if values.size > 2_000_000:
        return int((at_or_above.astype(object) * below.astype(object)).sum())
    return int((at_or_above * below).sum())


@dataclass(frozen=True)
class PairKernel:
    """Bounded kernel of ``arity`` pair arguments.

    ``func`` must broadcast over leading axes; each argument carries a
    trailing axis of length 2. ``fast_sum``, when given, returns the full
    V-statistic sum over an ``(m, 2)`` array of pairs without enumeration.
    """

    name: str
    arity: int
    func: Callable[..., np.ndarray]
    bound: float
    fast_sum: Callable[[np.ndarray], float] | None = None

    def __call__(self, *pairs):
        return self.func(*pairs)


H1 = PairKernel("h1", 2, kernel_h1, 1.0, fast_sum=_h1_sum_counting)
H2_LIFTED = PairKernel("h2", 3, _h2_lifted, 1.0, fast_sum=lambda p: _h2_sum_counting(p[:, 0]))

BUILTIN_KERNELS = {"h1": H1, "h2": H2_LIFTED}


def constant_kernel(c: float, arity: int = 2) -> PairKernel:
    return PairKernel(f"const({c:g})", arity, lambda *args: np.float64(c), abs(c))


@dataclass(frozen=True)
class VStatResult:
    """``value = total / normalization`` with ``normalization = (n - 1) ** r``."""

    value: float
    normalization: int
    terms: int
    total: float


def _check_bound_default() -> bool:
    return os.environ.get("XI_CHECK_BOUNDS", "") not in ("", "0")


def as_pairs(data) -> np.ndarray:
    """Consecutive pairs from a :class:`RankData`, a 1-d ``y'`` array, or an (m, 2) array."""
    if isinstance(data, RankData):
        return data.pairs
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        return np.column_stack([arr[:-1], arr[1:]])
    if arr.ndim == 2 and arr.shape[1] == 2:
        return arr
    raise ValueError("expected RankData, a 1-d array of Y', or an (m, 2) array of pairs")


def _direct_sum(kernel: PairKernel, pairs: np.ndarray, check: bool):
    m, r = len(pairs), kernel.arity
    inner = m ** (r - 1)
    chunk = max(1, _BLOCK // max(inner, 1))
    total = 0
    for start in range(0, m, chunk):
        lead = pairs[start : start + chunk]
        args = [lead.reshape((len(lead),) + (1,) * (r - 1) + (2,))]
        for j in range(1, r):
            shape = [1] * r + [2]
            shape[j] = m
            args.append(pairs.reshape(shape))
        vals = np.broadcast_to(kernel.func(*args), (len(lead),) + (m,) * (r - 1))
        if check and vals.size and np.max(np.abs(vals)) > kernel.bound * (1 + 1e-12):
            raise ValueError(f"kernel {kernel.name} exceeded its declared bound {kernel.bound}")
        part = vals.sum()
        total = total + (int(part) if np.issubdtype(vals.dtype, np.integer) else float(part))
    return total


def v_statistic(kernel: PairKernel, data, *, check_bound: bool | None = None, use_fast: bool = True) -> VStatResult:
    """V-statistic of ``kernel`` over the pairs (Y'_1, Y'_2), ..., (Y'_{n-1}, Y'_n).

    Averages ``kernel`` over all ``(n - 1) ** r`` index tuples with repetition.
    Arity 1 and 2 are summed directly for any n; arity >= 3 uses the kernel's
    counting shortcut if it has one, otherwise direct summation limited to
    n <= 400 (and at most 2e8 terms).
    """
    pairs = as_pairs(data)
    m, r = len(pairs), kernel.arity
    if m < 1 or r < 1:
        raise ArityTooLargeForN("need at least one pair and arity >= 1")
    check = _check_bound_default() if check_bound is None else check_bound
    norm = m**r
    if use_fast and kernel.fast_sum is not None:
        total = kernel.fast_sum(pairs)
    else:
        if r >= 3 and (m + 1 > MAX_N_HIGH_ARITY or norm > MAX_TERMS_HIGH_ARITY):
            raise ArityTooLargeForN(f"direct summation with arity {r} needs n <= {MAX_N_HIGH_ARITY}")
        total = _direct_sum(kernel, pairs, check)
    return VStatResult(total / norm, norm, norm, total)


@dataclass(frozen=True)
class XiDecomposition:
    """Both routes to the numerator and denominator of ``1 - xi_n``.

    ``num_kernel`` sums h1 over i <= n-1 and all j <= n (no truncation), so it
    equals ``num_direct`` exactly; likewise ``den_kernel`` is the full triple
    sum of h2. ``v_h1``/``v_h2`` are the pair V-statistics, whose ratio
    approximates ``1 - xi_n`` up to ``residual``.
    """

    n: int
    xi_n: float
    num_direct: int
    num_kernel: int
    den_direct: int
    den_kernel: int
    v_h1: float
    v_h2: float
    residual: float

    @property
    def identities_hold(self) -> bool:
        return self.num_direct == self.num_kernel and self.den_direct == self.den_kernel

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["identities_hold"] = self.identities_hold
        return d


def _num_kernel_sum(yp: np.ndarray) -> int:
    n = yp.size
    pairs = np.column_stack([yp[:-1], yp[1:]])
    targets = np.column_stack([yp, yp])
    if n > 3000:
        lo = np.minimum(pairs[:, 0], pairs[:, 1])
        hi = np.maximum(pairs[:, 0], pairs[:, 1])
        s = np.sort(yp)
        return int((np.searchsorted(s, hi, side="right") - np.searchsorted(s, lo, side="right")).sum())
    total = 0
    chunk = max(1, _BLOCK // n)
    for start in range(0, n - 1, chunk):
        total += int(kernel_h1(pairs[start : start + chunk, None, :], targets[None, :, :]).sum())
    return total


def _den_kernel_sum(yp: np.ndarray) -> int:
    n = yp.size
    if n > MAX_N_HIGH_ARITY:
        return _h2_sum_counting(yp)
    total = 0
    for i in range(n):
        total += int(kernel_h2(yp[i], yp[:, None], yp[None, :]).sum())
    return total


def decompose_xi(rd: RankData) -> XiDecomposition:
    """Check the kernel rewriting of ``xi_n`` on one sample.

    Raises
    ------
    AllYEqual
    """
    xi = xi_n(rd)
    num, den = xi_sums(rd)
    yp = rd.y_prime
    pairs = rd.pairs
    v1 = v_statistic(H1, pairs).value
    v2 = v_statistic(H2_LIFTED, pairs).value
    residual = abs((1.0 - xi) - v1 / (2.0 * v2)) if v2 > 0 else math.inf
    return XiDecomposition(
        n=rd.n,
        xi_n=xi,
        num_direct=num,
        num_kernel=_num_kernel_sum(yp),
        den_direct=den,
        den_kernel=_den_kernel_sum(yp),
        v_h1=v1,
        v_h2=v2,
        residual=residual,
    )

