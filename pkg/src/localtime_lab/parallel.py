"""Seeded substreams and an order-independent block map.

Every Monte Carlo estimator splits its sample budget into fixed-size blocks.
Block ``k`` draws from ``SeedSequence(seed).spawn(...)[k]`` so the merged
result does not depend on how many workers ran the blocks.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

from .errors import LabError

T = TypeVar("T")

__all__ = ["worker_count", "block_sizes", "block_generators", "map_blocks", "map_items", "derive_seeds"]


def worker_count() -> int:
    """Worker threads, from LTL_THREADS (default 1)."""
    raw = os.environ.get("LTL_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise LabError(f"LTL_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


def block_sizes(n_total: int, block: int) -> list[int]:
    if n_total < 1:
        raise LabError(f"sample count must be positive, got {n_total}")
    full, rest = divmod(n_total, block)
    return [block] * full + ([rest] if rest else [])


def block_generators(seed: int, n_blocks: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    return [np.random.default_rng(c) for c in children]


def map_blocks(
    fn: Callable[[np.random.Generator, int], T],
    seed: int,
    n_total: int,
    block: int = 1 << 16,
) -> list[T]:
    """Apply ``fn(rng, size)`` to every block; results come back in block order."""
    sizes = block_sizes(n_total, block)
    rngs = block_generators(seed, len(sizes))
    jobs: Sequence = list(zip(rngs, sizes))
    workers = worker_count()
    if workers == 1 or len(jobs) == 1:
        return [fn(r, s) for r, s in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def map_items(fn: Callable[[T], object], items: Sequence[T]) -> list:
    """Apply ``fn`` to each item, in order, on LTL_THREADS workers."""
    workers = worker_count()
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def derive_seeds(seed: int, n: int) -> list[int]:
    """``n`` independent 63-bit integer seeds derived from ``seed``."""
    if n < 1:
        raise LabError(f"need at least one seed, got {n}")
    state = np.random.SeedSequence(seed).generate_state(n, dtype=np.uint64)
    return [int(s >> np.uint64(1)) for s in state]
