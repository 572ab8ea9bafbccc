"""Population quantities behind the limiting law of sqrt(n) (xi_n - xi).

Notation: Q is the law of a pair (Y1, Y2) drawn i.i.d. from the conditional
law of Y at one common X ~ P^X (the "common-X mixture"). With

    mu1 = P(min(Y1, Y2) < Y3 <= max(Y1, Y2)),  (Y1, Y2) ~ Q, Y3 ~ P^Y
    mu2 = P(Y1 < Y2 <= Y3),                     Y's i.i.d. P^Y

we have xi = 1 - mu1 / (2 mu2), and sqrt(n)(xi_n - xi) -> N(0, sigma^2) with

    sigma^2 = (sigma1^2 - 2 sigma12 mu1/mu2 + sigma2^2 (mu1/mu2)^2) / (2 mu2)^2.

Each sigma component is Gamma(F, G) for projection functions F, G of pairs:

    Gamma(F, G) = sum_{k=-1,0,1} E[F(Y1,Y2) (G(Y1+k,Y2+k) - G(Y3,Y4))]
                  + E[F(Y1,Y2) G(Y3,Y4)] - E[F] E[G]

where Y0..Y4 share one X. The projections are

    H1(y, y') = P(min(y,y') < Y <= max(y,y')) + P(min(Y1,Y2) < y <= max(Y1,Y2)),  (Y1,Y2) ~ Q
    H2(y)     = P(y < Y1 <= Y2) + P(Y1 < y <= Y2) + P(Y1 < Y2 <= y),  Y1, Y2 i.i.d. P^Y

and H2 is applied to the first coordinate of a pair.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, NamedTuple

import numpy as np

from ._rng import STREAM_THEORY, derive_rng, ordered_map
from .errors import ArityGuard, BadParams, DegenerateY, SupportTooLarge
from .model import GenerativeModel, JointPMF
from .vstat import PairKernel

ENUMERATION_GUARD = 30
MAX_MC_ARITY = 4
_MC_BLOCK_ELEMS = 200_000


# ---------------------------------------------------------------------------
# exact enumeration for finite-support laws


def _tables(pmf: JointPMF, rational: bool):
    """(px, py, C) as float arrays, or as Fraction object arrays."""
    if rational:
        if pmf.prob_exact is None:
            raise ValueError("this PMF was not built from exact rationals")
        P = pmf.prob_exact
        px = P.sum(axis=1)
        py = P.sum(axis=0)
        C = np.empty_like(P)
        for i in range(P.shape[0]):
            for j in range(P.shape[1]):
                C[i, j] = P[i, j] / px[i] if px[i] != 0 else Fraction(0)
        return px, py, C
    return pmf.px, pmf.py, pmf.conditional()


def _pair_law(px, C):
    return (C * px[:, None]).T @ C


def conditional_pair_law(pmf: JointPMF) -> np.ndarray:
    """``q[a, b] = sum_x p(x) p(y_a | x) p(y_b | x)``, the law Q on support_y x support_y."""
    px, _, C = _tables(pmf, False)
    return _pair_law(px, C)


def _index_minmax(k: int):
    idx = np.arange(k)
    return np.minimum.outer(idx, idx), np.maximum.outer(idx, idx)


class Moments(NamedTuple):
    mu1: Any
    mu2: Any
    xi: Any
    xi_dss: Any


def exact_moments(pmf: JointPMF, rational: bool | None = None) -> Moments:
    """mu1, mu2, xi = 1 - mu1/(2 mu2), and xi from the ratio of integrated variances.

    ``xi_dss`` is computed as the integral over P^Y of Var(P(Y >= y | X))
    divided by the integral of Var(1{Y >= y}), a route that does not use
    mu1/mu2. With ``rational=True`` (default when the PMF is exact), all four
    values are :class:`fractions.Fraction`.
    """
    rational = pmf.is_exact if rational is None else rational
    px, py, C = _tables(pmf, rational)
    F = np.cumsum(py)
    L = F - py
    S = 1 - L
    mu2 = (py * L * S).sum()
    if mu2 == 0:
        raise DegenerateY("mu2 = 0: Y is almost surely constant")
    lo, hi = _index_minmax(py.size)
    q = _pair_law(px, C)
    mu1 = (q * (F[hi] - F[lo])).sum()
    xi = 1 - mu1 / (2 * mu2)

    # P(Y >= y_k | X = x_i)
    G = np.cumsum(C[:, ::-1], axis=1)[:, ::-1]
    mean_g = px @ G
    var_g = px @ (G * G) - mean_g * mean_g
    xi_dss = (py * var_g).sum() / (py * S * (1 - S)).sum()
    if not rational:
        return Moments(float(mu1), float(mu2), float(xi), float(xi_dss))
    return Moments(mu1, mu2, xi, xi_dss)


@dataclass(frozen=True, eq=False)
class HTables:
    """H1 on support_y x support_y, H2 on support_y, and the pair law Q."""

    support_y: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    pair_law: np.ndarray


def _h_tables(px, py, C):
    F = np.cumsum(py)
    L = F - py
    S = 1 - L
    k = py.size
    lo, hi = _index_minmax(k)
    q = _pair_law(px, C)
    first = F[hi] - F[lo]
    idx = np.arange(k)
    # between[a, b, c] = 1{min(a,b) < c <= max(a,b)}
    between = (lo[:, :, None] < idx) & (idx <= hi[:, :, None])
    second = np.tensordot(q, between, axes=([0, 1], [0, 1]))
    H1 = first + second[:, None]

    w = py * S
    tail = w[::-1].cumsum()[::-1] - w  # sum over a > c of P(Y=a) P(Y>=a)
    head = np.cumsum(py * L)  # sum over b <= c of P(Y=b) P(Y<b)
    H2 = tail + L * S + head
    return H1, H2, q


def exact_h_tables(pmf: JointPMF) -> HTables:
    px, py, C = _tables(pmf, False)
    H1, H2, q = _h_tables(px, py, C)
    return HTables(pmf.support_y, H1, H2, q)


def _gamma(F: np.ndarray, G: np.ndarray, px: np.ndarray, C: np.ndarray) -> float:
    """Gamma(F, G) under the common-X mixture, by exact summation over (x, y0..y4)."""
    a0 = np.einsum("x,xa,xb,ab->", px, C, C, F * G)
    a_plus = np.einsum("x,xb,xb,xb->", px, C, C @ F, C @ G.T)
    a_minus = np.einsum("x,xb,xb,xb->", px, C, C @ F.T, C @ G)
    mF = np.einsum("xa,ab,xb->x", C, F, C)
    mG = np.einsum("xa,ab,xb->x", C, G, C)
    b = px @ (mF * mG)
    return float(a0 + a_plus + a_minus - 2.0 * b - (px @ mF) * (px @ mG))


@dataclass
class TheoryReport:
    mu1: float
    mu2: float
    sigma1_sq: float
    sigma2_sq: float
    sigma12: float
    sigma_sq: float
    xi: float
    method: str
    se: dict[str, float] | None = None
    xi_dss: float | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def sigma(self) -> float:
        return math.sqrt(max(self.sigma_sq, 0.0))

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TheoryReport":
        return cls(**d)


def combine_sigma(mu1: float, mu2: float, s1: float, s2: float, s12: float) -> float:
    """Delta-method variance of mu1/(2 mu2) from the joint covariance of the two V-statistics."""
    if mu2 <= 0:
        raise DegenerateY("mu2 must be positive")
    inv = 1.0 / (2.0 * mu2) ** 2
    rho = mu1 / mu2
    return float(inv * (s1 - 2.0 * s12 * rho + s2 * rho * rho))


def exact_sigma(pmf: JointPMF, guard: int = ENUMERATION_GUARD) -> TheoryReport:
    """All limiting quantities for a finite-support law, by exact summation.

    Raises
    ------
    SupportTooLarge
        If ``|support_y| > guard``.
    DegenerateY
    """
    if pmf.support_y.size > guard:
        raise SupportTooLarge(f"|support_y| = {pmf.support_y.size} exceeds the guard {guard}")
    mom = exact_moments(pmf)
    mom = Moments(*(float(v) for v in mom))
    px, py, C = _tables(pmf, False)
    H1, H2, _ = _h_tables(px, py, C)
    G2 = np.repeat(H2[:, None], H2.size, axis=1)
    s1 = _gamma(H1, H1, px, C)
    s2 = _gamma(G2, G2, px, C)
    s12 = 0.5 * (_gamma(H1, G2, px, C) + _gamma(G2, H1, px, C))
    return TheoryReport(
        mu1=mom.mu1,
        mu2=mom.mu2,
        sigma1_sq=s1,
        sigma2_sq=s2,
        sigma12=s12,
        sigma_sq=combine_sigma(mom.mu1, mom.mu2, s1, s2, s12),
        xi=mom.xi,
        method="exact",
        xi_dss=mom.xi_dss,
    )


# ---------------------------------------------------------------------------
# Monte Carlo for generative models


def _between(lo, hi, t):
    return (lo < t) & (t <= hi)


def _h1_hat(y, yp, ref, c1, c2):
    """Estimate H1 at points (y, yp) (shape (b,)) from inner batches of shape (b, k)."""
    lo = np.minimum(y, yp)[:, None]
    hi = np.maximum(y, yp)[:, None]
    first = _between(lo, hi, ref).mean(axis=1)
    second = _between(np.minimum(c1, c2), np.maximum(c1, c2), y[:, None]).mean(axis=1)
    return first + second


def _h2_hat(y, v1, v2):
    y = y[:, None]
    ind = ((y < v1) & (v1 <= v2)).astype(float)
    ind += (v1 < y) & (y <= v2)
    ind += (v1 < v2) & (v2 <= y)
    return ind.mean(axis=1)


def _y_batch(model: GenerativeModel, rng, shape):
    return model.sample_y(rng, int(np.prod(shape))).reshape(shape)


def _common_batch(model: GenerativeModel, rng, shape):
    a, b = model.sample_common_pairs(rng, int(np.prod(shape)))
    return a.reshape(shape), b.reshape(shape)


def _outer_points(model: GenerativeModel, rng, b):
    """y0..y4 sharing one X, plus (y3', y4') at an independent X."""
    x = model.sample_x(rng, b)
    ys = [model.sample_y_given_x(x, rng) for _ in range(5)]
    x2 = model.sample_x(rng, b)
    return ys, (model.sample_y_given_x(x2, rng), model.sample_y_given_x(x2, rng))


def _bracket(h01, h12, h23, h34, h34p):
    return (h01 + h12 + h23) - (2.0 * h34 + h34p)


def _sigma_block(model: GenerativeModel, rng, b: int, k: int, c1: float, c2: float) -> np.ndarray:
    (y0, y1, y2, y3, y4), (y3p, y4p) = _outer_points(model, rng, b)
    shape = (b, k)
    ref_a, ref_b = _y_batch(model, rng, shape), _y_batch(model, rng, shape)
    ca, cb = _common_batch(model, rng, shape), _common_batch(model, rng, shape)
    va = (_y_batch(model, rng, shape), _y_batch(model, rng, shape))
    vb = (_y_batch(model, rng, shape), _y_batch(model, rng, shape))

    # the bracket has mean zero, so centring the leading factor keeps the
    # product unbiased while removing most of its variance
    h1_pre = _h1_hat(y1, y2, ref_a, *ca) - c1
    h2_pre = _h2_hat(y1, *va) - c2

    def h1b(u, v):
        return _h1_hat(u, v, ref_b, *cb)

    def h2b(u):
        return _h2_hat(u, *vb)

    br1 = _bracket(h1b(y0, y1), h1b(y1, y2), h1b(y2, y3), h1b(y3, y4), h1b(y3p, y4p))
    br2 = _bracket(h2b(y0), h2b(y1), h2b(y2), h2b(y3), h2b(y3p))
    t1 = h1_pre * br1
    t2 = h2_pre * br2
    t12 = 0.5 * (h1_pre * br2 + h2_pre * br1)
    return np.column_stack([t1, t2, t12])


def _moment_batch(model: GenerativeModel, rng, m: int) -> tuple[float, float]:
    """Unbiased U-statistic estimates of (mu1, mu2) from ``m`` common-X pairs.

    The first coordinates ``a`` of the pairs are an i.i.d. sample of the
    Y-marginal, and ``a_j`` is independent of pair ``i`` for ``j != i``:

        mu1 ~ #{(i, j), j != i: min(a_i, b_i) < a_j <= max(a_i, b_i)} / (m (m-1))
        mu2 ~ #{(i, j, k) distinct: a_j < a_i <= a_k} / (m (m-1) (m-2))
    """
    a, b = model.sample_common_pairs(rng, m)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    s = np.sort(a)
    inside = np.searchsorted(s, hi, side="right") - np.searchsorted(s, lo, side="right")
    inside = inside - (lo < hi) * (a == hi)  # drop j = i
    mu1 = inside.sum(dtype=float) / (m * (m - 1.0))
    below = np.searchsorted(s, a, side="left").astype(float)
    at_or_above = m - below - 1.0
    mu2 = float(np.dot(below, at_or_above)) / (m * (m - 1.0) * (m - 2.0))
    return float(mu1), mu2


def mc_moments(model: GenerativeModel, n_draws: int, seed: int = 0, batches: int = 32):
    """Estimate (mu1, mu2) and their covariance matrix from independent batches."""
    per = max(3, n_draws // batches)
    vals = np.array(
        ordered_map(lambda i: _moment_batch(model, derive_rng(seed, STREAM_THEORY, 0, i), per), range(batches))
    )
    mean = vals.mean(axis=0)
    cov = np.cov(vals, rowvar=False) / batches
    return mean, cov


MIN_OUTER = 1000
MIN_INNER = 100


def _check_mc_sizes(n_outer: int, n_inner: int) -> None:
    if n_outer < MIN_OUTER or n_inner < MIN_INNER:
        raise BadParams(f"Monte Carlo needs n_outer >= {MIN_OUTER} and n_inner >= {MIN_INNER}")


def mc_theory(
    model: GenerativeModel,
    n_outer: int = 10_000,
    n_inner: int = 1_000,
    seed: int = 0,
    n_moment: int | None = None,
) -> TheoryReport:
    """Monte Carlo version of :func:`exact_sigma` for any generative model.

    mu1, mu2 come from ``n_moment`` draws (default ``min(n_outer * n_inner, 1e7)``).
    Each sigma component is the mean over ``n_outer`` outer draws of
    (x, y0..y4) of a product of H-estimates, where the two factors of each
    product use independent inner batches of size ``n_inner``; this makes the
    estimate unbiased. The leading factor is centred by its mean (2 mu1 for
    H1, 3 mu2 for H2), which is allowed because the second factor has mean
    zero, and cuts the Monte Carlo variance. Standard errors come from the outer-replicate spread
    and ignore the (much smaller) uncertainty in mu1, mu2.

    Raises
    ------
    DegenerateY
        If the mu2 estimate is within 3 standard errors of zero.
    """
    _check_mc_sizes(n_outer, n_inner)
    n_moment = n_moment or min(n_outer * n_inner, 10**7)
    (mu1, mu2), cov = mc_moments(model, n_moment, seed)
    se_mu1, se_mu2 = math.sqrt(max(cov[0, 0], 0.0)), math.sqrt(max(cov[1, 1], 0.0))
    if mu2 <= 3.0 * se_mu2:
        raise DegenerateY("estimated mu2 is indistinguishable from 0; Y looks almost surely constant")

    block = max(1, _MC_BLOCK_ELEMS // n_inner)
    starts = list(range(0, n_outer, block))
    parts = ordered_map(
        lambda j: _sigma_block(
            model,
            derive_rng(seed, STREAM_THEORY, 1, j),
            min(block, n_outer - starts[j]),
            n_inner,
            2.0 * mu1,
            3.0 * mu2,
        ),
        range(len(starts)),
    )
    T = np.vstack(parts)
    means = T.mean(axis=0)
    ses = T.std(axis=0, ddof=1) / math.sqrt(n_outer)
    s1, s2, s12 = (float(v) for v in means)

    rho = mu1 / mu2
    lin = T[:, 0] - 2.0 * rho * T[:, 2] + rho * rho * T[:, 1]
    scale = 1.0 / (2.0 * mu2) ** 2
    sigma_sq = combine_sigma(mu1, mu2, s1, s2, s12)

    xi = 1.0 - mu1 / (2.0 * mu2)
    grad = np.array([-1.0 / (2.0 * mu2), mu1 / (2.0 * mu2 * mu2)])
    se_xi = math.sqrt(max(grad @ cov @ grad, 0.0))
    return TheoryReport(
        mu1=float(mu1),
        mu2=float(mu2),
        sigma1_sq=s1,
        sigma2_sq=s2,
        sigma12=s12,
        sigma_sq=sigma_sq,
        xi=float(xi),
        method="monte_carlo",
        se={
            "mu1": se_mu1,
            "mu2": se_mu2,
            "xi": se_xi,
            "sigma1_sq": float(ses[0]),
            "sigma2_sq": float(ses[1]),
            "sigma12": float(ses[2]),
            "sigma_sq": float(lin.std(ddof=1) / math.sqrt(n_outer) * scale),
        },
        meta={"n_outer": n_outer, "n_inner": n_inner, "n_moment": n_moment, "seed": seed},
    )


def mc_h2(model: GenerativeModel, points, n: int = 100_000, seed: int = 0):
    """Estimate H2 at ``points`` with standard errors (one shared batch of ``n`` pairs)."""
    rng = derive_rng(seed, STREAM_THEORY, 2)
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    v1, v2 = model.sample_y(rng, n), model.sample_y(rng, n)
    est, se = [], []
    for y in pts:
        ind = ((y < v1) & (v1 <= v2)).astype(float) + ((v1 < y) & (y <= v2)) + ((v1 < v2) & (v2 <= y))
        est.append(ind.mean())
        se.append(ind.std(ddof=1) / math.sqrt(n))
    return np.array(est), np.array(se)


def model_theory(
    model: GenerativeModel,
    n_outer: int = 10_000,
    n_inner: int = 1_000,
    seed: int = 0,
) -> TheoryReport:
    """Exact quantities when the model has a finite PMF, Monte Carlo otherwise."""
    if model.pmf is not None:
        rep = exact_sigma(model.pmf)
    else:
        rep = mc_theory(model, n_outer, n_inner, seed)
    rep.meta.setdefault("model", model.name)
    return rep


# ---------------------------------------------------------------------------
# general pair kernels


@dataclass(frozen=True)
class VStatMoments:
    mu_h: float
    mu_h_se: float
    sigma_h_sq: float
    sigma_h_sq_se: float
    arity: int
    meta: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _q_pairs(model: GenerativeModel, rng, shape):
    a, b = _common_batch(model, rng, shape)
    return np.stack([a, b], axis=-1)


def _projection_hat(kernel: PairKernel, point: np.ndarray, others: np.ndarray) -> np.ndarray:
    """sum_j E[h(..., point in slot j, ...)] from inner draws ``others`` of shape (b, k, r, 2)."""
    r = kernel.arity
    b, k = others.shape[:2]
    total = np.zeros(b)
    p = point[:, None, :]
    for j in range(r):
        args = [p if i == j else others[:, :, i, :] for i in range(r)]
        vals = np.broadcast_to(kernel.func(*args), (b, k))
        total += vals.mean(axis=1)
    return total


def _kernel_sigma_block(kernel: PairKernel, model: GenerativeModel, rng, b: int, k: int, centre: float) -> np.ndarray:
    (y0, y1, y2, y3, y4), (y3p, y4p) = _outer_points(model, rng, b)
    r = kernel.arity
    inner_a = _q_pairs(model, rng, (b, k, r))
    inner_b = _q_pairs(model, rng, (b, k, r))

    def pt(u, v):
        return np.stack([u, v], axis=-1)

    pre = _projection_hat(kernel, pt(y1, y2), inner_a) - centre
    br = _bracket(
        _projection_hat(kernel, pt(y0, y1), inner_b),
        _projection_hat(kernel, pt(y1, y2), inner_b),
        _projection_hat(kernel, pt(y2, y3), inner_b),
        _projection_hat(kernel, pt(y3, y4), inner_b),
        _projection_hat(kernel, pt(y3p, y4p), inner_b),
    )
    return pre * br


def general_vstat_moments(
    kernel: PairKernel,
    model: GenerativeModel,
    n_outer: int = 10_000,
    n_inner: int = 1_000,
    seed: int = 0,
    n_moment: int | None = None,
) -> VStatMoments:
    """Monte Carlo mean and limiting variance of the pair V-statistic of ``kernel``.

    ``mu_h`` averages the kernel over ``n_moment`` independent draws of r
    Q-pairs. When the kernel has a counting shortcut (``fast_sum``), each of
    32 batches instead evaluates the complete V-statistic of
    ``n_moment / 32`` i.i.d. Q-pairs, which is far more precise for the same
    cost; the O(1/batch) bias from repeated indices is bounded by
    ``meta["mu_bias_bound"]``. ``sigma_h_sq`` is Gamma(H, H) with H the sum of
    the kernel's r first-order projections, estimated as in :func:`mc_theory`.
    """
    r = kernel.arity
    if r > MAX_MC_ARITY:
        raise ArityGuard(f"arity {r} exceeds the Monte Carlo guard {MAX_MC_ARITY}")
    _check_mc_sizes(n_outer, n_inner)
    meta: dict[str, Any] = {"kernel": kernel.name, "n_outer": n_outer, "n_inner": n_inner, "seed": seed}

    if kernel.fast_sum is not None:
        n_moment = n_moment or max(2**22, min(4 * n_outer * n_inner, 2**25))
        batches = 32
        per = max(r + 1, n_moment // batches)

        def v_batch(j):
            a, b = model.sample_common_pairs(derive_rng(seed, STREAM_THEORY, 5, j), per)
            return float(kernel.fast_sum(np.column_stack([a, b]))) / float(per) ** r

        vals = np.array(ordered_map(v_batch, range(batches)))
        mu = float(vals.mean())
        mu_se = float(vals.std(ddof=1) / math.sqrt(batches))
        distinct = math.prod(1.0 - k / per for k in range(r))
        meta.update(mu_method="batched_v_statistic", mu_bias_bound=2.0 * kernel.bound * (1.0 - distinct))
        n_moment = per * batches
    else:
        n_moment = n_moment or min(n_outer * n_inner, 4 * 10**6)
        chunk = max(1, _MC_BLOCK_ELEMS // r)
        starts = list(range(0, n_moment, chunk))

        def mu_part(j):
            rng = derive_rng(seed, STREAM_THEORY, 3, j)
            m = min(chunk, n_moment - starts[j])
            z = _q_pairs(model, rng, (m, r))
            v = np.broadcast_to(kernel.func(*[z[:, i, :] for i in range(r)]), (m,)).astype(float)
            return v.sum(), (v * v).sum()

        sums = np.array(ordered_map(mu_part, range(len(starts))))
        mu = sums[:, 0].sum() / n_moment
        var = max(sums[:, 1].sum() / n_moment - mu * mu, 0.0) * n_moment / max(n_moment - 1, 1)
        mu_se = math.sqrt(var / n_moment)
        meta.update(mu_method="direct", mu_bias_bound=0.0)
    meta["n_moment"] = n_moment

    block = max(1, _MC_BLOCK_ELEMS // (n_inner * r))
    ostarts = list(range(0, n_outer, block))
    parts = ordered_map(
        lambda j: _kernel_sigma_block(
            kernel, model, derive_rng(seed, STREAM_THEORY, 4, j), min(block, n_outer - ostarts[j]), n_inner, r * mu
        ),
        range(len(ostarts)),
    )
    T = np.concatenate(parts)
    return VStatMoments(
        mu_h=float(mu),
        mu_h_se=mu_se,
        sigma_h_sq=float(T.mean()),
        sigma_h_sq_se=float(T.std(ddof=1) / math.sqrt(n_outer)) if n_outer > 1 else math.inf,
        arity=r,
        meta=meta,
    )
