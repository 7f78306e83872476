"""Counter-based random substreams.

Every (seed, stream, index) triple addresses its own Philox substream: the
key comes from the seed and the two high words of the 256-bit counter hold
``stream`` and ``index``.  Draws inside a substream advance only the low
word, so substreams never overlap and a coordinate's draws do not depend on
how many other coordinates exist or which members they use.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .distributions import open_uniform

EVAL = 0
SEARCH = 1
RESTART = 2

U64 = 2**64


@lru_cache(maxsize=64)
def _key(seed: int) -> tuple[int, int]:
    if not 0 <= seed < U64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    state = np.random.SeedSequence(seed).generate_state(2, np.uint64)
    return int(state[0]), int(state[1])


def substream(seed: int, stream: int, index: int) -> np.random.Generator:
    key = np.array(_key(seed), dtype=np.uint64)
    counter = np.array([0, 0, stream, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def coordinate_uniforms(seed: int, k: int, reps: int, stream: int = EVAL) -> np.ndarray:
    """Open-interval uniforms for coordinate ``k``; entry r drives repetition r."""
    return open_uniform(substream(seed, stream, k), reps)
