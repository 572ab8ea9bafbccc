"""Repeated-sampling experiments for the normal limit of xi_n."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.stats import norm

from ._rng import STREAM_SIM, derive_rng, ordered_map
from .errors import BadParams, ZeroSigma
from .estimator import reorder_by_x, xi_n
from .model import GenerativeModel, sample
from .theory import TheoryReport, model_theory

ZERO_SIGMA_TOL = 1e-12
_REPS_PER_TASK = 64


def ks_normal(values, sigma: float = 1.0) -> float:
    """Kolmogorov-Smirnov distance between the empirical CDF of ``values / sigma`` and Phi.

    Raises
    ------
    ZeroSigma
        If ``sigma <= 0``.
    """
    if not sigma > 0:
        raise ZeroSigma(f"sigma must be positive, got {sigma}")
    z = np.sort(np.asarray(values, dtype=float).ravel()) / sigma
    k = z.size
    if k == 0:
        raise BadParams("values must be nonempty")
    cdf = norm.cdf(z)
    i = np.arange(1, k + 1)
    return float(max(np.max(i / k - cdf), np.max(cdf - (i - 1) / k)))


def _replicate(model: GenerativeModel, n: int, seed: int, i: int) -> float:
    s = sample(model, n, derive_rng(seed, STREAM_SIM, i, 0))
    return xi_n(reorder_by_x(s, derive_rng(seed, STREAM_SIM, i, 1)))


def simulate_xi(model: GenerativeModel, n: int, reps: int, seed: int = 0, start: int = 0) -> np.ndarray:
    """xi_n for replicates ``start, ..., start + reps - 1``; each has its own derived seed."""

    def task(lo):
        hi = min(lo + _REPS_PER_TASK, start + reps)
        return [_replicate(model, n, seed, i) for i in range(lo, hi)]

    chunks = ordered_map(task, range(start, start + reps, _REPS_PER_TASK))
    return np.array([v for c in chunks for v in c])


@dataclass
class SimResult:
    """Draws of sqrt(n) (xi_n - xi) and their comparison with N(0, sigma^2).

    When the theoretical variance is zero, ``zero_sigma`` is set,
    ``ks_distance`` is None and the draws are reported unstandardized.
    """

    draws: np.ndarray
    xi_theory: float
    sigma_sq_theory: float
    ks_distance: float | None
    zero_sigma: bool
    hist_edges: np.ndarray
    hist_counts: np.ndarray
    config: dict[str, Any]
    theory: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "xi_theory": self.xi_theory,
            "sigma_sq_theory": self.sigma_sq_theory,
            "ks_distance": self.ks_distance,
            "zero_sigma": self.zero_sigma,
            "histogram": {
                "rule": "freedman-diaconis",
                "edges": self.hist_edges.tolist(),
                "counts": self.hist_counts.tolist(),
            },
            "draws": self.draws.tolist(),
            "theory": self.theory,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def write_histogram_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_left", "bin_right", "count"])
            for a, b, c in zip(self.hist_edges[:-1], self.hist_edges[1:], self.hist_counts):
                w.writerow([repr(float(a)), repr(float(b)), int(c)])


def run_clt_experiment(
    model: GenerativeModel,
    n: int,
    reps: int,
    seed: int = 0,
    theory: TheoryReport | None = None,
) -> SimResult:
    """Simulate ``reps`` values of sqrt(n) (xi_n - xi) and compare with the predicted normal law.

    ``theory`` defaults to :func:`xiclt.theory.model_theory` (exact for PMF
    models, Monte Carlo otherwise).
    """
    if n < 100 or reps < 100:
        raise BadParams("need n >= 100 and reps >= 100")
    theory = theory or model_theory(model, seed=seed)
    xis = simulate_xi(model, n, reps, seed)
    draws = math.sqrt(n) * (xis - theory.xi)
    zero = theory.sigma_sq <= ZERO_SIGMA_TOL
    ks = None if zero else ks_normal(draws, math.sqrt(theory.sigma_sq))
    counts, edges = np.histogram(draws, bins="fd")
    return SimResult(
        draws=draws,
        xi_theory=float(theory.xi),
        sigma_sq_theory=float(theory.sigma_sq),
        ks_distance=ks,
        zero_sigma=zero,
        hist_edges=edges,
        hist_counts=counts,
        config={"model": model.name, "n": n, "reps": reps, "seed": seed},
        theory=theory.to_dict(),
    )
