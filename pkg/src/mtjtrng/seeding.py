"""Counter-keyed random streams.

Every stream is ``Generator(Philox(SeedSequence(seed, spawn_key=key)))`` with
``key`` a tuple of non-negative integers such as ``(TRIALS, trial_index)``.
SeedSequence hashing and Philox are platform independent, so a trial's noise
depends only on (seed, key), never on which worker ran it or in what order.
"""

import numpy as np

TRIALS = 0
INSTANCES = 1
BOOTSTRAP = 2
SWEEP = 3


def generator(seed, *key) -> np.random.Generator:
    if isinstance(seed, tuple):
        seed, key = seed[0], tuple(seed[1:]) + key
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def trial_key(base_seed: int, trial_index: int, *prefix) -> tuple:
    return (int(base_seed), *prefix, TRIALS, int(trial_index))
