"""Bivariate laws for (X, Y): finite joint PMFs and generative samplers.

Every quantity in :mod:`xiclt.theory` conditions on shared X values, so a
model exposes its X-marginal and its conditional law of Y given X directly
instead of only joint draws.
"""

from __future__ import annotations

import json
import math
import numbers
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from ._rng import STREAM_SAMPLE, SeedLike, as_generator
from .errors import (
    BadParams,
    DegenerateY,
    MassNotOne,
    NegativeProbability,
    ParseError,
    UnknownModel,
)

RENORMALIZE_TOL = 1e-9


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class JointPMF:
    """Finite-support joint law of (X, Y).

    ``prob[i, j]`` is P(X = support_x[i], Y = support_y[j]). When the PMF was
    built from rational entries, ``prob_exact`` holds the same table as an
    object array of :class:`fractions.Fraction`.
    """

    support_x: np.ndarray
    support_y: np.ndarray
    prob: np.ndarray
    prob_exact: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.prob.shape

    @property
    def px(self) -> np.ndarray:
        return self.prob.sum(axis=1)

    @property
    def py(self) -> np.ndarray:
        return self.prob.sum(axis=0)

    @property
    def is_exact(self) -> bool:
        return self.prob_exact is not None

    def conditional(self) -> np.ndarray:
        """Rows of P(Y = y_j | X = x_i); rows with zero X-mass are all zero."""
        px = self.px
        out = np.zeros_like(self.prob)
        pos = px > 0
        out[pos] = self.prob[pos] / px[pos, None]
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "support_x": self.support_x.tolist(),
            "support_y": self.support_y.tolist(),
            "prob": self.prob.tolist(),
        }


def _is_rational(v: Any) -> bool:
    return isinstance(v, numbers.Rational) and not isinstance(v, bool)


def _strict_support(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise BadParams(f"{name} must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(arr)):
        raise BadParams(f"{name} contains non-finite values")
    if np.any(np.diff(arr) <= 0):
        raise BadParams(f"{name} must be strictly increasing")
    return arr


def make_pmf(support_x: Sequence[float], support_y: Sequence[float], prob: Sequence[Sequence[Any]]) -> JointPMF:
    """Validate and build a :class:`JointPMF`.

    Entries may be floats or exact rationals (``int``/``Fraction``, or strings
    such as ``"1/4"``). A total mass within 1e-9 of one is renormalized;
    anything further off is rejected.

    Raises
    ------
    NegativeProbability, MassNotOne, DegenerateY, BadParams
    """
    sx = _strict_support(support_x, "support_x")
    sy = _strict_support(support_y, "support_y")
    rows = [list(r) for r in prob]
    if len(rows) != sx.size or any(len(r) != sy.size for r in rows):
        raise BadParams(f"prob must have shape ({sx.size}, {sy.size})")

    flat = []
    for r in rows:
        for v in r:
            if isinstance(v, str):
                try:
                    v = Fraction(v)
                except (ValueError, ZeroDivisionError) as exc:
                    raise BadParams(f"bad probability entry {v!r}") from exc
            flat.append(v)
    exact = all(_is_rational(v) for v in flat)

    if exact:
        ex = np.array([Fraction(v) for v in flat], dtype=object).reshape(sx.size, sy.size)
        if any(v < 0 for v in ex.flat):
            raise NegativeProbability("probabilities must be non-negative")
        total = sum(ex.flat, Fraction(0))
        if abs(total - 1) > RENORMALIZE_TOL:
            raise MassNotOne(f"total mass {float(total)!r} is not 1")
        if total != 1:
            ex = ex / total
        p = ex.astype(float)
    else:
        p = np.array([float(v) for v in flat], dtype=float).reshape(sx.size, sy.size)
        ex = None
        if not np.all(np.isfinite(p)):
            raise BadParams("probabilities must be finite")
        if np.any(p < 0):
            raise NegativeProbability("probabilities must be non-negative")
        total = math.fsum(p.ravel())
        if abs(total - 1.0) > RENORMALIZE_TOL:
            raise MassNotOne(f"total mass {total!r} is not 1")
        p = p / total

    if np.count_nonzero(p.sum(axis=0) > 0) < 2:
        raise DegenerateY("the Y marginal is a point mass")
    return JointPMF(_freeze(sx), _freeze(sy), _freeze(p), None if ex is None else _freeze(ex))


@dataclass(frozen=True, eq=False)
class GenerativeModel:
    """Sampling contract for a bivariate law.

    ``x_sampler(rng, size)`` draws from the X-marginal and
    ``y_sampler(x, rng)`` draws one Y from the conditional law at each entry
    of ``x``. Both are vectorized.
    """

    name: str
    params: Mapping[str, Any]
    x_sampler: Callable[[np.random.Generator, int], np.ndarray]
    y_sampler: Callable[[np.ndarray, np.random.Generator], np.ndarray]
    pmf: JointPMF | None = None
    descriptor: Mapping[str, Any] = field(default_factory=dict)

    def sample_x(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.asarray(self.x_sampler(rng, size), dtype=float)

    def sample_y_given_x(self, x, rng: np.random.Generator):
        scalar = np.ndim(x) == 0
        y = np.asarray(self.y_sampler(np.atleast_1d(np.asarray(x, dtype=float)), rng), dtype=float)
        return float(y[0]) if scalar else y

    def sample_joint(self, rng: np.random.Generator, size: int | None = None):
        m = 1 if size is None else size
        x = self.sample_x(rng, m)
        y = self.sample_y_given_x(x, rng)
        if size is None:
            return float(x[0]), float(y[0])
        return x, y

    def sample_y(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draws from the Y-marginal."""
        return self.sample_joint(rng, size)[1]

    def sample_common_pairs(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Pairs (Y1, Y2) drawn i.i.d. from the conditional law at one shared X."""
        x = self.sample_x(rng, size)
        return self.sample_y_given_x(x, rng), self.sample_y_given_x(x, rng)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"name": self.name, "params": dict(self.params)}
        if self.pmf is not None:
            d["pmf"] = self.pmf.to_dict()
        return d


def pmf_model(pmf: JointPMF, name: str = "custom_pmf", params: Mapping[str, Any] | None = None) -> GenerativeModel:
    """Wrap a :class:`JointPMF` into a generative model (inverse-CDF sampling)."""
    sx, sy = pmf.support_x, pmf.support_y
    cum_x = np.cumsum(pmf.px)
    cum_y = np.cumsum(pmf.conditional(), axis=1)

    def x_sampler(rng, size):
        idx = np.searchsorted(cum_x, rng.random(size) * cum_x[-1], side="right")
        return sx[np.minimum(idx, sx.size - 1)]

    def y_sampler(x, rng):
        xi = np.searchsorted(sx, x)
        if np.any(xi >= sx.size) or np.any(sx[np.minimum(xi, sx.size - 1)] != x):
            raise BadParams("x value outside the PMF support")
        u = rng.random(x.shape)
        yi = np.empty(x.shape, dtype=np.intp)
        for k in np.unique(xi):
            mask = xi == k
            row = cum_y[k]
            yi[mask] = np.searchsorted(row, u[mask] * row[-1], side="right")
        return sy[np.minimum(yi, sy.size - 1)]

    return GenerativeModel(name, dict(params or {}), x_sampler, y_sampler, pmf=pmf)


def _binomial_pmf(trials: int, p: float) -> np.ndarray:
    k = np.arange(trials + 1)
    return np.array([math.comb(trials, int(i)) * p**i * (1 - p) ** (trials - i) for i in k])


def _binomial_params(params: Mapping[str, Any]) -> tuple[int, float]:
    trials = params.get("trials", 10)
    p = params.get("p", 1 / 3)
    if isinstance(p, str):
        p = float(Fraction(p))
    if not isinstance(trials, numbers.Integral) or trials < 1:
        raise BadParams("trials must be a positive integer")
    if not 0 < float(p) < 1:
        raise BadParams("p must lie in (0, 1)")
    return int(trials), float(p)


def _check_keys(params: Mapping[str, Any], allowed: set[str]) -> None:
    extra = set(params) - allowed
    if extra:
        raise BadParams(f"unexpected parameters: {sorted(extra)}")


def _indep_binomial(params):
    _check_keys(params, {"trials", "p"})
    trials, p = _binomial_params(params)
    marg = _binomial_pmf(trials, p)
    support = np.arange(trials + 1, dtype=float)
    pmf = make_pmf(support, support, np.outer(marg, marg))
    model = GenerativeModel(
        "indep_binomial",
        {"trials": trials, "p": p},
        lambda rng, size: rng.binomial(trials, p, size).astype(float),
        lambda x, rng: rng.binomial(trials, p, x.shape).astype(float),
        pmf=pmf,
        descriptor={"label": f"X, Y independent Bin({trials}, {p:g})"},
    )
    return model


def _binomial_plus_uniform(params):
    _check_keys(params, {"trials", "p", "scale"})
    trials, p = _binomial_params(params)
    scale = float(params.get("scale", 10))
    if not scale > 0:
        raise BadParams("scale must be positive")
    return GenerativeModel(
        "binomial_plus_uniform",
        {"trials": trials, "p": p, "scale": scale},
        lambda rng, size: rng.binomial(trials, p, size).astype(float),
        lambda x, rng: x / scale + rng.random(x.shape),
        descriptor={"label": f"X ~ Bin({trials}, {p:g}), Y = X/{scale:g} + U[0,1]"},
    )


def _indep_uniform(params):
    _check_keys(params, set())
    return GenerativeModel(
        "indep_uniform",
        {},
        lambda rng, size: rng.random(size),
        lambda x, rng: rng.random(x.shape),
        descriptor={"label": "X, Y independent U[0,1]"},
    )


def _product_pmf(params):
    _check_keys(params, {"px", "py", "support_x", "support_y"})
    try:
        px = [Fraction(v) if isinstance(v, str) else v for v in params["px"]]
        py = [Fraction(v) if isinstance(v, str) else v for v in params["py"]]
    except KeyError as exc:
        raise BadParams("product_pmf needs px and py") from exc
    sx = params.get("support_x", list(range(len(px))))
    sy = params.get("support_y", list(range(len(py))))
    prob = [[a * b for b in py] for a in px]
    return pmf_model(make_pmf(sx, sy, prob), "product_pmf", params)


def _custom_pmf(params):
    _check_keys(params, {"support_x", "support_y", "prob"})
    try:
        pmf = make_pmf(params["support_x"], params["support_y"], params["prob"])
    except KeyError as exc:
        raise BadParams("custom_pmf needs support_x, support_y and prob") from exc
    return pmf_model(pmf, "custom_pmf", params)


BUILTINS: dict[str, Callable[[Mapping[str, Any]], GenerativeModel]] = {
    "indep_binomial": _indep_binomial,
    "binomial_plus_uniform": _binomial_plus_uniform,
    "product_pmf": _product_pmf,
    "custom_pmf": _custom_pmf,
    "indep_uniform": _indep_uniform,
}


def builtin_model(name: str, params: Mapping[str, Any] | None = None) -> GenerativeModel:
    """Build a named model. PMF-backed models carry their exact law in ``.pmf``."""
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise UnknownModel(f"unknown model {name!r}; choose from {sorted(BUILTINS)}") from None
    try:
        return factory(dict(params or {}))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (BadParams, DegenerateY, MassNotOne, NegativeProbability)):
            raise
        raise BadParams(str(exc)) from exc


def model_from_spec(spec: Mapping[str, Any]) -> GenerativeModel:
    """Model from the JSON spec form ``{"name", "params"}`` or ``{"pmf": {...}}``."""
    if "pmf" in spec:
        p = spec["pmf"]
        try:
            pmf = make_pmf(p["support_x"], p["support_y"], p["prob"])
        except KeyError as exc:
            raise BadParams(f"pmf spec missing {exc}") from exc
        return pmf_model(pmf)
    if "name" not in spec:
        raise BadParams('model spec needs "name" or "pmf"')
    return builtin_model(spec["name"], spec.get("params", {}))


def load_model(path_or_name: str | Path) -> GenerativeModel:
    """Load a model spec file; a bare builtin name is accepted too."""
    path = Path(path_or_name)
    if not path.exists():
        if str(path_or_name) in BUILTINS:
            return builtin_model(str(path_or_name))
        raise ParseError(f"model file not found: {path}")
    try:
        spec = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in {path}: {exc}", row=exc.lineno, column=exc.colno) from exc
    if not isinstance(spec, dict):
        raise ParseError("model spec must be a JSON object")
    return model_from_spec(spec)


@dataclass(frozen=True, eq=False)
class Sample:
    """Observed pairs (x_i, y_i), finite and at least two of them."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        y = np.array(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise BadParams("x and y must be 1-d arrays of equal length")
        if x.size < 2:
            raise BadParams("a sample needs at least two pairs")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise BadParams("sample contains non-finite values")
        object.__setattr__(self, "x", _freeze(x))
        object.__setattr__(self, "y", _freeze(y))

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, float]]) -> "Sample":
        arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    @property
    def n(self) -> int:
        return int(self.x.size)

    @property
    def pairs(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def __len__(self) -> int:
        return self.n


def sample(model: GenerativeModel, n: int, seed: SeedLike = 0) -> Sample:
    """Draw ``n`` i.i.d. pairs; equal ``(model, n, seed)`` give identical output."""
    if n < 2:
        raise BadParams("n must be at least 2")
    rng = as_generator(seed, STREAM_SAMPLE)
    x, y = model.sample_joint(rng, n)
    return Sample(x, y)
