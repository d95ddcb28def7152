"""Counter-based random streams with deterministic substream derivation.

Philox generators keyed by a SeedSequence path: any (seed, *path) pair maps
to the same stream regardless of process or evaluation order, so Monte Carlo
trials can run on a worker pool and still be bit-reproducible.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *path: int) -> np.random.Generator:
    """Generator for the substream addressed by ``path`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in path))
    return np.random.Generator(np.random.Philox(ss))


def spawn_rngs(seed: int, count: int, *prefix: int) -> list[np.random.Generator]:
    """Independent substreams ``(seed, *prefix, 0..count-1)``."""
    return [make_rng(seed, *prefix, i) for i in range(count)]
