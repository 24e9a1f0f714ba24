"""Deterministic RNG substreams and chunked parallel execution."""

from __future__ import annotations

import concurrent.futures
from typing import Callable

import numpy as np

_MASK64 = (1 << 64) - 1

# Chunk size is fixed (never derived from the worker count) so that results
# are byte-identical regardless of how many workers consume the chunks.
DEFAULT_CHUNK = 4096


def derive_seed(seed: int, *tags: int) -> int:
    """Derive a child seed from a root seed and a tuple of integer tags."""
    ss = np.random.SeedSequence(
        entropy=int(seed) & _MASK64,
        spawn_key=tuple(int(t) & _MASK64 for t in tags),
    )
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def substream(seed: int, index: int) -> np.random.Generator:
    """Counter-based random stream for sample `index` under root `seed`.

    Philox keyed by (seed, index): the stream depends only on the pair, never
    on how samples are batched across workers.
    """
    key = np.array([int(seed) & _MASK64, int(index) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def chunked_ranges(n: int, chunk: int = DEFAULT_CHUNK) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]


def parallel_chunk_map(
    fn: Callable[[int, int], np.ndarray],
    n: int,
    workers: int = 1,
    chunk: int = DEFAULT_CHUNK,
) -> np.ndarray:
    """Apply ``fn(lo, hi)`` over fixed index chunks and concatenate in order.

    ``fn`` must return an array whose leading axis has length ``hi - lo`` and
    must depend only on the indices it is given (per-index substreams), so the
    concatenated result is identical for any worker count.
    """
    ranges = chunked_ranges(n, chunk)
    if not ranges:
        raise ValueError("empty range")
    if workers <= 1 or len(ranges) == 1:
        parts = [fn(lo, hi) for lo, hi in ranges]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda r: fn(r[0], r[1]), ranges))
    return np.concatenate(parts, axis=0)
