"""Seed-derived random substreams.

Replicates are cut into fixed-size blocks and block ``b`` always draws
from the stream keyed by ``(seed, b)``, so the numbers a replicate sees do
not depend on how many workers process the blocks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator

import numpy as np

DEFAULT_BLOCK = 4096


def substream(seed: int, key: int, *extra: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(key),) + tuple(int(e) for e in extra))
    return np.random.Generator(np.random.PCG64(ss))


def block_sizes(reps: int, block: int = DEFAULT_BLOCK) -> list[int]:
    full, rest = divmod(int(reps), int(block))
    return [block] * full + ([rest] if rest else [])


def block_rngs(seed: int, reps: int, block: int = DEFAULT_BLOCK) -> Iterator[tuple[np.random.Generator, int]]:
    for b, count in enumerate(block_sizes(reps, block)):
        yield substream(seed, b), count


def map_blocks(
    fn: Callable[[np.random.Generator, int, int], np.ndarray],
    seed: int,
    reps: int,
    threads: int = 1,
    block: int = DEFAULT_BLOCK,
) -> np.ndarray:
    """Apply ``fn(rng, count, block_index)`` to every block and concatenate in block order."""
    sizes = block_sizes(reps, block)
    jobs = [(substream(seed, b), count, b) for b, count in enumerate(sizes)]
    if threads <= 1 or len(jobs) <= 1:
        parts = [fn(*job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: fn(*job), jobs))
    return np.concatenate(parts, axis=0) if parts else np.empty(0)
