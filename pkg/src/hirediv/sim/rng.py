"""Counter-based random streams.

Every (seed, key...) tuple maps to its own Philox stream, so results do not
depend on which worker draws first.
"""

from __future__ import annotations

import numpy as np

# Stream tags that keep bootstrap draws apart from pool draws.
POOL_STREAM = 0
BOOT_STREAM = 1
TRUTH_STREAM = 2


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) for k in keys)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
