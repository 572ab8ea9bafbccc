"""Seeded, splittable random streams and ordered parallel mapping."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar, Union

import numpy as np

SeedLike = Union[int, np.random.Generator]

T = TypeVar("T")
R = TypeVar("R")

# stream identifiers, so that independent uses of one master seed never collide
STREAM_SAMPLE = 0
STREAM_TIEBREAK = 1
STREAM_BOOTSTRAP = 2
STREAM_SIM = 3
STREAM_THEORY = 4


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Return an independent PCG64 generator for ``(seed, *keys)``."""
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def as_generator(seed: SeedLike, *keys: int) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return derive_rng(int(seed), *keys)


def max_workers() -> int:
    env = os.environ.get("XI_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(4, os.cpu_count() or 1))


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """Map ``fn`` over ``items``, possibly in threads; output keeps input order."""
    items = list(items)
    workers = max_workers() if workers is None else workers
    if workers <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
