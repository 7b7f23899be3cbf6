"""Seeded random streams.

Every random draw comes from ``stream(seed, purpose, *index)``, which builds a
PCG64 generator from ``SeedSequence(seed, spawn_key=(purpose, *index))``.  The
spawn key acts as a counter: streams for different purposes or indices are
statistically independent, and each one depends only on the experiment
seed and its key, never on how many other draws were made.
"""

import numpy as np

SOFIC_PERMUTATIONS = 1
POINT_SAMPLES = 2
MICROSTATE_SAMPLES = 3
BAD_VERTICES = 4
TEST_DATA = 5


def stream(seed: int, purpose: int, *index: int) -> np.random.Generator:
    if seed is None:
        raise ValueError("a seed is required for randomized tasks")
    ss = np.random.SeedSequence(int(seed), spawn_key=(purpose, *index))
    return np.random.Generator(np.random.PCG64(ss))
