"""Seeded random streams.

Every stochastic routine takes a 64-bit seed and derives independent
substreams from ``(seed, stream, chunk)`` with a counter-based generator, so
results never depend on how chunks are distributed over workers.
"""

from __future__ import annotations

import numpy as np

# Stream tags keep unrelated consumers of one seed apart.
STREAM_FOLD = 1
STREAM_COUNT = 2
STREAM_PILOT = 3
STREAM_SEARCH = 4
STREAM_SET = 5
STREAM_INTEGRAL = 6


def substream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def chunk_sizes(samples: int, chunk: int) -> list[int]:
    full, rest = divmod(samples, chunk)
    return [chunk] * full + ([rest] if rest else [])
