"""Seed handling for reproducible, worker-count-independent Monte Carlo."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")


def seed_sequence(rng=None) -> np.random.SeedSequence:
    """Coerce an int, SeedSequence or Generator into a SeedSequence.

    A Generator is consumed (one draw) so repeated calls give fresh streams.
    """
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, np.random.Generator):
        return np.random.SeedSequence(int(rng.integers(0, 2**63)))
    return np.random.SeedSequence(rng)


def generator(rng=None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(seed_sequence(rng))


def chunk_bounds(n: int, chunk: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]


def map_chunks(
    fn: Callable[[int, int, np.random.Generator], T],
    n: int,
    rng=None,
    chunk: int = 1 << 17,
    workers: int = 1,
) -> list[T]:
    """Apply ``fn(lo, hi, gen)`` over fixed-size chunks of ``range(n)``.

    Each chunk owns a child stream spawned from the master seed, so the
    result list is identical for any ``workers``.
    """
    bounds = chunk_bounds(n, chunk)
    children = seed_sequence(rng).spawn(len(bounds))
    tasks: Sequence = [(lo, hi, np.random.default_rng(ss)) for (lo, hi), ss in zip(bounds, children)]
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda t: fn(*t), tasks))
