"""Counter-based random substreams.

Every random quantity in the package is drawn from a generator derived as
``SeedSequence(root_seed, spawn_key=key)`` where ``key`` is a tuple of
non-negative integers naming the consumer (experiment cell, chunk of runs,
...).  Two consumers with different keys get statistically independent
streams, and a consumer's stream does not depend on how many other
consumers exist or in which order/process they run.
"""
from __future__ import annotations

import numpy as np

DEFAULT_SEED = 20080716


def substream(root_seed: int, *key: int) -> np.random.Generator:
    if root_seed < 0 or any(k < 0 for k in key):
        raise ValueError("seed and substream keys must be non-negative")
    ss = np.random.SeedSequence(int(root_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)
