"""Confidence intervals for xi from one sample.

Two constructions are offered:

* ``plugin_normal``: the limiting variance evaluated at the empirical law of
  the sample (meaningful when X takes repeated values), combined with a
  normal quantile;
* ``moon_bootstrap``: the m-out-of-n bootstrap, which needs no variance
  formula. The default ``m = ceil(n ** (2/3))`` is a conventional choice,
  not a tuned one.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from scipy.stats import norm

from ._rng import STREAM_BOOTSTRAP, derive_rng, ordered_map
from .errors import AllYEqual, BadM, BadParams, NoXTies, SupportTooLarge
from .estimator import reorder_by_x, xi_n, xi_n_batch
from .model import JointPMF, Sample, make_pmf
from .theory import ENUMERATION_GUARD, exact_sigma

_BOOT_CHUNK_ELEMS = 2_000_000


@dataclass(frozen=True)
class CIResult:
    """Interval ``[lower, upper]`` for xi around the point estimate ``xi_n``.

    The point is not guaranteed to lie inside a bootstrap interval.
    """

    point: float
    lower: float
    upper: float
    level: float
    method: str
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _check_level(level: float) -> None:
    if not 0.0 < level < 1.0:
        raise BadParams(f"level must lie in (0, 1), got {level}")


def empirical_pmf(sample: Sample) -> JointPMF:
    """Empirical joint law of the sample on its distinct x and y values."""
    sx, xi = np.unique(sample.x, return_inverse=True)
    sy, yi = np.unique(sample.y, return_inverse=True)
    counts = np.zeros((sx.size, sy.size))
    np.add.at(counts, (xi, yi), 1.0)
    return make_pmf(sx, sy, counts / sample.n)


def plugin_variance(sample: Sample, guard: int = ENUMERATION_GUARD) -> float:
    """Limiting variance of sqrt(n) xi_n evaluated at the empirical law.

    Raises
    ------
    NoXTies
        If all x values are distinct: each empirical conditional law is then a
        point mass and the plug-in carries no information (use the bootstrap).
    SupportTooLarge
        If the sample has more than ``guard`` distinct y values.
    DegenerateY
        If all y values are equal.
    """
    if np.unique(sample.x).size == sample.n:
        raise NoXTies("no repeated x values; the plug-in variance is uninformative, use the bootstrap")
    n_y = np.unique(sample.y).size
    if n_y > guard:
        raise SupportTooLarge(f"{n_y} distinct y values exceed the guard {guard}")
    return exact_sigma(empirical_pmf(sample), guard=guard).sigma_sq


def normal_ci(sample: Sample, level: float = 0.9, seed: int = 0, guard: int = ENUMERATION_GUARD) -> CIResult:
    """``xi_n +- z_{(1+level)/2} * sqrt(sigma_hat^2 / n)`` with the plug-in variance.

    ``seed`` drives the random tie-breaking among equal x values.
    """
    _check_level(level)
    point = xi_n(reorder_by_x(sample, seed))
    s2 = plugin_variance(sample, guard)
    half = float(norm.ppf(0.5 + level / 2.0)) * math.sqrt(max(s2, 0.0) / sample.n)
    return CIResult(
        point=point,
        lower=point - half,
        upper=point + half,
        level=level,
        method="plugin_normal",
        diagnostics={"sigma_hat_sq": s2, "n": sample.n, "seed": seed},
    )


def default_m(n: int) -> int:
    """``ceil(n ** (2/3))``, clipped to ``[2, n]``."""
    return min(n, max(2, math.ceil(round(n ** (2.0 / 3.0), 9))))


def bootstrap_xi(sample: Sample, m: int, B: int, seed: int = 0) -> np.ndarray:
    """xi of ``B`` resamples of size ``m`` drawn with replacement.

    Resample ``b`` uses its own generator derived from ``(seed, b)`` for both
    the indices and the tie-breaking keys, so results do not depend on how the
    work is chunked. Resamples whose y values are all equal give NaN.
    """

    def draw(b):
        rng = derive_rng(seed, STREAM_BOOTSTRAP, b)
        return rng.integers(0, sample.n, size=m), rng.random(m)

    chunk = max(1, _BOOT_CHUNK_ELEMS // m)

    def run(start):
        idx, u = zip(*(draw(b) for b in range(start, min(start + chunk, B))))
        idx = np.stack(idx)
        return xi_n_batch(sample.x[idx], sample.y[idx], np.stack(u))

    return np.concatenate(ordered_map(run, range(0, B, chunk)))


def moon_bootstrap_ci(
    sample: Sample,
    m: int | None = None,
    B: int = 500,
    level: float = 0.9,
    seed: int = 0,
) -> CIResult:
    """m-out-of-n bootstrap interval.

    With ``q_a`` the type-7 a-quantile of ``sqrt(m) (xi*_m - xi_n)``, the
    interval is ``[xi_n - q_{(1+level)/2} / sqrt(n), xi_n - q_{(1-level)/2} / sqrt(n)]``.

    Raises
    ------
    BadM
        If ``m`` is outside ``[2, n]``.
    AllYEqual
    """
    _check_level(level)
    n = sample.n
    m = default_m(n) if m is None else int(m)
    if not 2 <= m <= n:
        raise BadM(f"m must satisfy 2 <= m <= n = {n}, got {m}")
    if B < 100:
        raise BadParams(f"B must be at least 100, got {B}")
    point = xi_n(reorder_by_x(sample, seed))
    stars = bootstrap_xi(sample, m, B, seed)
    valid = stars[np.isfinite(stars)]
    if valid.size == 0:
        raise AllYEqual("every resample has constant y")
    roots = math.sqrt(m) * (valid - point)
    q_lo, q_hi = np.quantile(roots, [(1.0 - level) / 2.0, (1.0 + level) / 2.0], method="linear")
    rn = math.sqrt(n)
    return CIResult(
        point=point,
        lower=float(point - q_hi / rn),
        upper=float(point - q_lo / rn),
        level=level,
        method="moon_bootstrap",
        diagnostics={"m": m, "B": B, "n": n, "seed": seed, "dropped_constant_resamples": int(B - valid.size)},
    )
